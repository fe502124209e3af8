use serde::{Deserialize, Serialize};

use super::kpi::KpiSummary;
use super::matrix::{CaseTuple, TodPreset, WeatherPreset};
use super::requirements::Verdict;
use crate::autonomy::{Control, Perception, Planning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
    Timeout,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Aborted => "aborted",
            RunStatus::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub case_id: u32,
    pub tuple: CaseTuple,
    pub status: RunStatus,
    /// What ended the run.
    pub termination: String,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
    pub kpis: KpiSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl VerificationResult {
    pub fn passes(&self, verification: &str) -> bool {
        self.verdicts.iter().any(|v| v.verification == verification && v.pass)
    }
}

/// Column labels: each variant value, each parameter value, then Total.
pub fn score_columns() -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    cols.extend(Perception::ALL.iter().map(|v| v.label().to_string()));
    cols.extend(Planning::ALL.iter().map(|v| v.label().to_string()));
    cols.extend(Control::ALL.iter().map(|v| v.label().to_string()));
    cols.extend(TodPreset::ALL.iter().map(|v| v.label().to_string()));
    cols.extend(WeatherPreset::ALL.iter().map(|v| v.label().to_string()));
    cols.push("Total".into());
    cols
}

fn in_column(t: &CaseTuple, column: &str) -> bool {
    column == "Total"
        || [
            t.variant.perception.label(),
            t.variant.planning.label(),
            t.variant.control.label(),
            t.time_of_day.label(),
            t.weather.label(),
        ]
        .contains(&column)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub label: String,
    /// `None` where no case falls in the column.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub columns: Vec<String>,
    /// Cases per column.
    pub counts: Vec<usize>,
    pub rows: Vec<ScoreRow>,
    pub cases: usize,
    pub expected_cases: usize,
}

impl ScoreTable {
    pub fn coverage_warning(&self) -> Option<String> {
        if self.cases == 0 {
            return Some(format!("no cases scored out of {}; every cell is empty", self.expected_cases));
        }
        (self.cases != self.expected_cases)
            .then(|| format!("only {} of {} cases scored; cells cover the scored cases", self.cases, self.expected_cases))
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.label == row)?.cells[c]
    }

    /// Table as CSV with four decimals; empty cells for empty columns.
    pub fn to_csv(&self) -> String {
        let mut out = format!("test,{}\n", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.cells.iter().map(|c| c.map(|v| format!("{v:.4}")).unwrap_or_default()).collect();
            out.push_str(&format!("{},{}\n", r.label, cells.join(",")));
        }
        out
    }
}

/// Pass fractions per verification (rows, in the given order, plus All) and
/// per axis value.
pub fn score_matrix(results: &[VerificationResult], verifications: &[String], expected_cases: usize) -> ScoreTable {
    let columns = score_columns();
    let members: Vec<Vec<&VerificationResult>> =
        columns.iter().map(|c| results.iter().filter(|r| in_column(&r.tuple, c)).collect()).collect();
    let fraction = |set: &[&VerificationResult], pass: &dyn Fn(&VerificationResult) -> bool| {
        (!set.is_empty()).then(|| set.iter().filter(|r| pass(r)).count() as f64 / set.len() as f64)
    };
    let mut rows: Vec<ScoreRow> = verifications
        .iter()
        .map(|v| ScoreRow { label: v.clone(), cells: members.iter().map(|m| fraction(m, &|r| r.passes(v))).collect() })
        .collect();
    rows.push(ScoreRow { label: "All".into(), cells: members.iter().map(|m| fraction(m, &|r| r.all_pass)).collect() });
    ScoreTable {
        columns,
        counts: members.iter().map(Vec::len).collect(),
        rows,
        cases: results.len(),
        expected_cases,
    }
}
