//! Parametric stand-in for the two object detectors.
//!
//! Per-frame detection probability for a visible object at range `r`:
//!
//! ```text
//! p = clamp(p_base · I^γi · V^γv · (R_f / max(r, r_floor))², 0, 1)
//! ```
//!
//! `I` is illumination, `V` visibility, and `R_f` the detector's reference
//! range, where a clear-noon object is found with probability `p_base`.
//! A detected object gets a confidence drawn from `N(p, σ)` clipped to
//! `[0, 1]`; the detector only reports boxes whose confidence reaches
//! `report_threshold`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Perception;
use crate::environment::EnvironmentState;
use crate::sensors::ProjectedObject;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_label: String,
    /// Box area at the 640×360 detector input, px².
    pub size: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub p_base: f64,
    pub reference_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionCalibration {
    pub c1_1: DetectorModel,
    pub c1_2: DetectorModel,
    pub illumination_exponent: f64,
    pub visibility_exponent: f64,
    pub range_floor: f64,
    pub confidence_sigma: f64,
    pub report_threshold: f64,
    /// Native 1280×720 area to 640×360 detector input.
    pub area_scale: f64,
}

impl Default for PerceptionCalibration {
    fn default() -> Self {
        Self {
            c1_1: DetectorModel { p_base: 0.75, reference_range: 40.0 },
            c1_2: DetectorModel { p_base: 0.95, reference_range: 60.0 },
            illumination_exponent: 1.5,
            visibility_exponent: 1.0,
            range_floor: 10.0,
            confidence_sigma: 0.05,
            report_threshold: 0.25,
            area_scale: 0.25,
        }
    }
}

impl PerceptionCalibration {
    pub fn model(&self, variant: Perception) -> &DetectorModel {
        match variant {
            Perception::C1_1 => &self.c1_1,
            Perception::C1_2 => &self.c1_2,
        }
    }

    pub fn detection_probability(&self, variant: Perception, range: f64, env: &EnvironmentState) -> f64 {
        let m = self.model(variant);
        let range_gain = (m.reference_range / range.max(self.range_floor)).powi(2);
        let p = m.p_base
            * env.illumination.powf(self.illumination_exponent)
            * env.visibility.powf(self.visibility_exponent)
            * range_gain;
        p.clamp(0.0, 1.0)
    }
}

/// Runs the detector oracle over one camera frame. Occluded objects are never
/// detected. Random draws happen in object order, two per unoccluded object.
pub fn perceive<R: Rng>(
    objects: &[ProjectedObject],
    env: &EnvironmentState,
    variant: Perception,
    calibration: &PerceptionCalibration,
    rng: &mut R,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for o in objects.iter().filter(|o| !o.occluded) {
        let p = calibration.detection_probability(variant, o.range, env);
        let u: f64 = rng.gen();
        let noise = Normal::new(0.0, calibration.confidence_sigma.max(1e-12))
            .expect("finite sigma")
            .sample(rng);
        if u >= p {
            continue;
        }
        let confidence = (p + noise).clamp(0.0, 1.0);
        if confidence >= calibration.report_threshold {
            out.push(Detection {
                class_label: o.class_label.clone(),
                size: o.bbox_area * calibration.area_scale,
                confidence,
            });
        }
    }
    out
}

/// The animal supercategory of the COCO label set.
pub const ANIMAL_CLASSES: [&str; 10] =
    ["bird", "cat", "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe"];
pub const MIN_DETECTION_SIZE: f64 = 2500.0;
pub const MIN_CONFIDENCE: f64 = 0.5;

/// Keeps animal detections that are large and confident enough; both
/// thresholds are inclusive.
pub fn filter_detections(dets: &[Detection]) -> Vec<Detection> {
    dets.iter()
        .filter(|d| {
            ANIMAL_CLASSES.contains(&d.class_label.as_str())
                && d.size >= MIN_DETECTION_SIZE
                && d.confidence >= MIN_CONFIDENCE
        })
        .cloned()
        .collect()
}
