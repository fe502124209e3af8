//! Test matrix generation, closed-loop execution, KPI extraction,
//! requirement verification and reporting.

pub mod executor;
pub mod kpi;
pub mod log;
pub mod matrix;
pub mod report;
pub mod requirements;
pub mod score;
pub mod simulator;
pub mod suite;

pub use executor::{default_jobs, execute_test, run_cases, CaseOutcome, ExecOptions, SchedulerStatus, TransportKind};
pub use kpi::{compute_kpis, KpiSummary, TickRecord};
pub use log::{log_file_name, CaseLog, LogLine};
pub use report::{summarize, Manifest, ResultsFile, RunDir, RunSummary, Unscored};
pub use matrix::{case_seed, generate_matrix, Axes, CaseFilter, CaseTuple, TestCase, TodPreset, WeatherPreset};
pub use requirements::{default_requirements, verify, Comparator, Metric, Requirement, Verdict};
pub use score::{score_matrix, RunStatus, ScoreTable, VerificationResult};
pub use simulator::{InstanceTracker, Simulator};
pub use suite::{SimulationSettings, Suite, Termination, BUILTIN_SCENARIO};

#[cfg(test)]
mod tests;
