use serde::{Deserialize, Serialize};

use super::kpi::{compute_kpis, TickRecord};
use super::matrix::TestCase;
use super::requirements::{verify, Requirement};
use super::score::{RunStatus, VerificationResult};

/// One line of a per-case JSON-lines log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogLine {
    Header { case: TestCase, suite: String },
    Tick(TickRecord),
    Footer {
        status: RunStatus,
        termination: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fault: Option<String>,
    },
}

/// A parsed case log.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseLog {
    pub case: TestCase,
    pub suite: String,
    pub ticks: Vec<TickRecord>,
    pub status: RunStatus,
    pub termination: String,
    pub fault: Option<String>,
}

impl CaseLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &LogLine| {
            out.push_str(&serde_json::to_string(line).expect("log line serializes"));
            out.push('\n');
        };
        push(&LogLine::Header { case: self.case.clone(), suite: self.suite.clone() });
        for t in &self.ticks {
            push(&LogLine::Tick(t.clone()));
        }
        push(&LogLine::Footer { status: self.status, termination: self.termination.clone(), fault: self.fault.clone() });
        out
    }

    /// Parses a log; fails on any bad line or a missing header or footer.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse = |(n, l): (usize, &str)| {
            serde_json::from_str::<LogLine>(l).map_err(|e| format!("line {}: {e}", n + 1))
        };
        let (case, suite) = match lines.next().map(parse).transpose()? {
            Some(LogLine::Header { case, suite }) => (case, suite),
            _ => return Err("missing header".into()),
        };
        let mut ticks = Vec::new();
        for item in lines {
            match parse(item)? {
                LogLine::Tick(t) => ticks.push(t),
                LogLine::Footer { status, termination, fault } => {
                    return Ok(Self { case, suite, ticks, status, termination, fault });
                }
                LogLine::Header { .. } => return Err(format!("line {}: second header", item.0 + 1)),
            }
        }
        Err("missing footer (log truncated)".into())
    }

    pub fn result(&self, requirements: &[Requirement]) -> VerificationResult {
        let kpis = compute_kpis(&self.ticks);
        let verdicts = verify(&kpis, requirements, self.status == RunStatus::Completed);
        VerificationResult {
            case_id: self.case.case_id,
            tuple: self.case.tuple,
            status: self.status,
            termination: self.termination.clone(),
            all_pass: verdicts.iter().all(|v| v.pass),
            verdicts,
            kpis,
            fault: self.fault.clone(),
        }
    }
}

pub fn log_file_name(case_id: u32) -> String {
    format!("case_{case_id:03}.jsonl")
}
