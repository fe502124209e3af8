use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use offroad_twin::bridge::BridgeSettings;
use offroad_twin::harness::{
    default_jobs, execute_test, run_cases, summarize, CaseFilter, CaseLog, CaseOutcome, ExecOptions, InstanceTracker,
    Manifest, RunDir, RunStatus, SchedulerStatus, Suite, TestCase, TransportKind,
};

/// Exit status when cases aborted or a replay diverged.
const EXIT_FAILED_CASES: u8 = 1;
/// Exit status for bad input: unreadable suite, bad filter, missing results.
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "offroad-vv", version, about = "Off-road digital twin verification harness")]
struct Cli {
    /// error | warn | info | debug | trace
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SuiteArgs {
    /// Suite file; the built-in dirt-road-herd suite when omitted.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Case ids or axis predicates, e.g. `15`, `id=1-8`, `C3=C3.2,P1=P1.1|P1.2`.
    #[arg(long)]
    filter: Option<String>,
    /// Replaces the suite's base seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

impl SuiteArgs {
    fn load(&self) -> Result<(Suite, Vec<TestCase>)> {
        let mut suite = match &self.suite {
            Some(p) => Suite::load(p)?,
            None => Suite::default(),
        };
        if let Some(seed) = self.seed_override {
            suite.base_seed = seed;
        }
        let mut cases = suite.cases()?;
        if let Some(f) = &self.filter {
            cases = f.parse::<CaseFilter>()?.apply(cases);
        }
        Ok((suite, cases))
    }
}

#[derive(Subcommand)]
enum Command {
    /// List the case matrix without running anything.
    Matrix {
        #[command(flatten)]
        suite: SuiteArgs,
        /// One JSON object per line instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the (filtered) matrix and write logs, results, scores and report.
    Run {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long, env = "OFFROAD_VV_OUT", default_value = "vv-out")]
        out: PathBuf,
        /// Concurrent cases; defaults to the number of logical cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "loopback")]
        transport: TransportKind,
        /// Make every simulator fault at this frame (testing aid).
        #[arg(long, hide = true)]
        fault_at_tick: Option<u64>,
    },
    /// Rebuild scores and report from the logs in a results directory.
    Report {
        #[arg(long, env = "OFFROAD_VV_OUT", default_value = "vv-out")]
        out: PathBuf,
    },
    /// Re-run one logged case and compare its log byte for byte.
    Replay {
        #[arg(long, env = "OFFROAD_VV_OUT", default_value = "vv-out")]
        out: PathBuf,
        #[arg(long)]
        case: u32,
        #[arg(long, default_value = "loopback")]
        transport: TransportKind,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).parse_default_env().init();
    let outcome = match cli.command {
        Command::Matrix { suite, json } => matrix(&suite, json),
        Command::Run { suite, out, jobs, transport, fault_at_tick } => {
            run(&suite, &out, jobs, ExecOptions { fault_at_tick, ..options(transport) })
        }
        Command::Report { out } => report(&out),
        Command::Replay { out, case, transport } => replay(&out, case, transport),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn matrix(args: &SuiteArgs, json: bool) -> Result<u8> {
    let (_, cases) = args.load()?;
    let mut out = std::io::stdout().lock();
    for c in &cases {
        if json {
            writeln!(out, "{}", serde_json::to_string(c)?)?;
        } else {
            writeln!(out, "{:03} {} seed={}", c.case_id, c.tuple, c.seed)?;
        }
    }
    Ok(0)
}

fn options(transport: TransportKind) -> ExecOptions {
    ExecOptions { transport, bridge: BridgeSettings::from_env(), fault_at_tick: None }
}

fn run(args: &SuiteArgs, out: &Path, jobs: Option<usize>, opts: ExecOptions) -> Result<u8> {
    let (suite, cases) = args.load()?;
    if cases.is_empty() {
        bail!("filter selects no cases");
    }
    let jobs = jobs.unwrap_or_else(default_jobs);
    let dir = RunDir::new(out);
    let manifest = Manifest { suite: suite.name.clone(), case_ids: cases.iter().map(|c| c.case_id).collect() };
    dir.begin(&suite, &manifest).with_context(|| format!("cannot prepare {}", out.display()))?;
    let tracker = InstanceTracker::default();
    let write_errors = std::sync::Mutex::new(Vec::new());
    let progress = |s: SchedulerStatus, done: Option<&CaseOutcome>| {
        let Some(o) = done else { return };
        if let Err(e) = dir.write_case(o) {
            write_errors.lock().expect("lock").push(format!("case {}: {e}", o.result.case_id));
        }
        let r = &o.result;
        eprintln!(
            "[running {} | pending {} | completed {}/{}] case {:03} {} {} ({}){}",
            s.running,
            s.pending,
            s.completed,
            s.total(),
            r.case_id,
            r.tuple,
            r.status.as_str(),
            r.termination,
            if r.all_pass { "" } else { " FAIL" }
        );
    };
    let outcomes = run_cases(&suite, &cases, &opts, jobs, &tracker, &progress)?;
    let errors = write_errors.into_inner().expect("lock");
    if !errors.is_empty() {
        bail!("could not write artifacts: {}", errors.join("; "));
    }
    let logs: Vec<Result<CaseLog, String>> = outcomes.iter().map(|o| Ok(o.log.clone())).collect();
    let summary = summarize(&suite, &manifest, &logs);
    dir.write_summary(&summary).with_context(|| format!("cannot write summary to {}", out.display()))?;
    let aborted = outcomes.iter().filter(|o| o.result.status == RunStatus::Aborted).count();
    let passed = outcomes.iter().filter(|o| o.result.all_pass).count();
    println!("{} cases, {passed} all-pass, {aborted} aborted; artifacts in {}", outcomes.len(), out.display());
    Ok(if aborted > 0 { EXIT_FAILED_CASES } else { 0 })
}

fn report(out: &Path) -> Result<u8> {
    let dir = RunDir::new(out);
    let summary = dir.summarize().with_context(|| format!("no readable run in {}", out.display()))?;
    for u in &summary.results.unscored {
        eprintln!("warning: case {:03} unscored: {}", u.case_id, u.reason);
    }
    dir.write_summary(&summary)?;
    println!(
        "{} of {} cases scored; report at {}",
        summary.scores.cases,
        summary.scores.expected_cases,
        out.join("report.md").display()
    );
    Ok(0)
}

fn replay(out: &Path, case_id: u32, transport: TransportKind) -> Result<u8> {
    let dir = RunDir::new(out);
    let suite = dir.load_suite()?;
    let path = dir.log_path(case_id);
    let recorded = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let log = CaseLog::parse(&recorded).map_err(anyhow::Error::msg)?;
    let scenario = Arc::new(suite.load_scenario()?);
    let outcome = execute_test(&log.case, &suite, scenario, &options(transport), &InstanceTracker::default());
    let fresh = outcome.log.to_jsonl();
    if fresh == recorded {
        println!("case {case_id:03}: replay identical ({} ticks)", outcome.log.ticks.len());
        Ok(0)
    } else {
        let line = fresh.lines().zip(recorded.lines()).position(|(a, b)| a != b).map_or(0, |i| i + 1);
        println!("case {case_id:03}: replay differs from line {line}");
        Ok(EXIT_FAILED_CASES)
    }
}
