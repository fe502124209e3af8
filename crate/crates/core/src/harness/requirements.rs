use serde::{Deserialize, Serialize};

use super::kpi::KpiSummary;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    DetectionCount,
    PeakJerk,
    MeanVelocityError,
    CollisionCount,
}

impl Metric {
    pub fn value(self, k: &KpiSummary) -> f64 {
        match self {
            Metric::DetectionCount => k.n_det_total as f64,
            Metric::PeakJerk => k.peak_jerk,
            Metric::MeanVelocityError => k.mean_velocity_error,
            Metric::CollisionCount => k.n_col_total as f64,
        }
    }

    /// KPI field the metric reads.
    pub fn kpi_name(self) -> &'static str {
        match self {
            Metric::DetectionCount => "n_det_total",
            Metric::PeakJerk => "peak_jerk",
            Metric::MeanVelocityError => "mean_velocity_error",
            Metric::CollisionCount => "n_col_total",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    GreaterThan,
    LessThan,
    /// `|x| ≤ threshold`.
    WithinAbs,
    Equal,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::GreaterThan => value > threshold,
            Comparator::LessThan => value < threshold,
            Comparator::WithinAbs => value.abs() <= threshold,
            Comparator::Equal => value == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::GreaterThan => ">",
            Comparator::LessThan => "<",
            Comparator::WithinAbs => "|x| ≤",
            Comparator::Equal => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    pub id: String,
    pub summary: String,
    pub description: String,
    pub metric: Metric,
    pub comparator: Comparator,
    pub threshold: f64,
    pub implemented_by: String,
    pub verified_by: String,
}

pub fn default_requirements() -> Vec<Requirement> {
    let r = |id: &str, summary: &str, description: &str, metric, comparator, threshold, c: &str, v: &str| Requirement {
        id: id.into(),
        summary: summary.into(),
        description: description.into(),
        metric,
        comparator,
        threshold,
        implemented_by: c.into(),
        verified_by: v.into(),
    };
    vec![
        r(
            "R1",
            "Detection",
            "The number of object detections throughout the test shall be greater than 1.",
            Metric::DetectionCount,
            Comparator::GreaterThan,
            1.0,
            "C1",
            "V1",
        ),
        r(
            "R2",
            "Comfort",
            "The peak jerk experienced by the vehicle shall be less than 6 m/s³.",
            Metric::PeakJerk,
            Comparator::LessThan,
            6.0,
            "C2",
            "V2",
        ),
        r(
            "R3",
            "Tracking",
            "The average estimated velocity error shall be within ±1 m/s.",
            Metric::MeanVelocityError,
            Comparator::WithinAbs,
            1.0,
            "C3",
            "V3",
        ),
        r(
            "R4",
            "Safety",
            "The total number of collisions of the vehicle shall be 0.",
            Metric::CollisionCount,
            Comparator::Equal,
            0.0,
            "C4",
            "V4",
        ),
    ]
}

/// Each requirement needs a unique id and unique component and verification links.
pub fn validate_requirements(reqs: &[Requirement]) -> Result<(), ConfigError> {
    if reqs.is_empty() {
        return Err(ConfigError::Invalid("no requirements defined".into()));
    }
    for (i, r) in reqs.iter().enumerate() {
        if r.id.is_empty() || r.implemented_by.is_empty() || r.verified_by.is_empty() {
            return Err(ConfigError::Invalid(format!("requirement {} lacks an id or link", i + 1)));
        }
        if !r.threshold.is_finite() {
            return Err(ConfigError::Invalid(format!("{}: non-finite threshold", r.id)));
        }
        for other in &reqs[..i] {
            if other.id == r.id || other.verified_by == r.verified_by {
                return Err(ConfigError::Invalid(format!("{} duplicates the id or verification of {}", r.id, other.id)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub verification: String,
    pub requirement: String,
    pub pass: bool,
}

/// Evaluates each requirement on the KPIs. `run_valid = false` (aborted or
/// timed-out run) fails every verdict.
pub fn verify(kpis: &KpiSummary, reqs: &[Requirement], run_valid: bool) -> Vec<Verdict> {
    reqs.iter()
        .map(|r| Verdict {
            verification: r.verified_by.clone(),
            requirement: r.id.clone(),
            pass: run_valid && r.comparator.holds(r.metric.value(kpis), r.threshold),
        })
        .collect()
}
