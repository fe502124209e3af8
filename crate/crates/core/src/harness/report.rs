//! Markdown report, score exports and the on-disk layout of a run:
//!
//! ```text
//! out/
//!   manifest.json        suite name and selected case ids
//!   suite.toml           effective suite
//!   logs/case_015.jsonl  per-case tick log
//!   results/case_015.json
//!   results.json  scores.csv  report.md
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::executor::CaseOutcome;
use super::kpi::motion_profile;
use super::log::{log_file_name, CaseLog};
use super::score::{score_matrix, RunStatus, ScoreTable, VerificationResult};
use super::suite::Suite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub suite: String,
    pub case_ids: Vec<u32>,
}

/// A selected case that could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unscored {
    pub case_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub suite: String,
    pub results: Vec<VerificationResult>,
    pub unscored: Vec<Unscored>,
}

/// Everything the summary files are made from.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub results: ResultsFile,
    pub scores: ScoreTable,
    pub report: String,
}

/// Scores and renders a run. `logs[i]` belongs to `manifest.case_ids[i]`.
pub fn summarize(suite: &Suite, manifest: &Manifest, logs: &[Result<CaseLog, String>]) -> RunSummary {
    let mut results = Vec::new();
    let mut good = Vec::new();
    let mut unscored = Vec::new();
    for (&id, log) in manifest.case_ids.iter().zip(logs) {
        match log {
            Ok(l) if l.case.case_id == id => {
                results.push(l.result(&suite.requirements));
                good.push(l);
            }
            Ok(l) => unscored.push(Unscored { case_id: id, reason: format!("log holds case {}", l.case.case_id) }),
            Err(e) => unscored.push(Unscored { case_id: id, reason: e.clone() }),
        }
    }
    let scores = score_matrix(&results, &suite.verification_ids(), manifest.case_ids.len());
    let report = render_report(suite, &scores, &good, &results, &unscored);
    RunSummary { results: ResultsFile { suite: suite.name.clone(), results, unscored }, scores, report }
}

/// Writes through a temporary file so a reader never sees half a file.
fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Output directory of a run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn log_path(&self, case_id: u32) -> PathBuf {
        self.root.join("logs").join(log_file_name(case_id))
    }

    pub fn result_path(&self, case_id: u32) -> PathBuf {
        self.root.join("results").join(format!("case_{case_id:03}.json"))
    }

    /// Creates the layout and records what is about to run.
    pub fn begin(&self, suite: &Suite, manifest: &Manifest) -> io::Result<()> {
        fs::create_dir_all(self.root.join("logs"))?;
        fs::create_dir_all(self.root.join("results"))?;
        write_atomic(&self.root.join("suite.toml"), &suite.to_toml_string())?;
        write_atomic(&self.root.join("manifest.json"), &json(manifest))
    }

    pub fn write_case(&self, outcome: &CaseOutcome) -> io::Result<()> {
        let id = outcome.result.case_id;
        write_atomic(&self.log_path(id), &outcome.log.to_jsonl())?;
        write_atomic(&self.result_path(id), &json(&outcome.result))
    }

    /// Writes results.json, scores.csv and report.md, stopping at the first
    /// failure; files already written stay.
    pub fn write_summary(&self, summary: &RunSummary) -> io::Result<()> {
        write_atomic(&self.root.join("results.json"), &json(&summary.results))?;
        write_atomic(&self.root.join("scores.csv"), &summary.scores.to_csv())?;
        write_atomic(&self.root.join("report.md"), &summary.report)
    }

    pub fn load_suite(&self) -> io::Result<Suite> {
        Suite::load(&self.root.join("suite.toml")).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }

    pub fn load_manifest(&self) -> io::Result<Manifest> {
        let text = fs::read_to_string(self.root.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Reads every selected case's log; a missing or unreadable log becomes
    /// an error entry rather than failing the whole load.
    pub fn load_logs(&self, manifest: &Manifest) -> Vec<Result<CaseLog, String>> {
        manifest
            .case_ids
            .iter()
            .map(|&id| {
                let name = log_file_name(id);
                let text = fs::read_to_string(self.log_path(id)).map_err(|e| format!("{name}: {e}"))?;
                CaseLog::parse(&text).map_err(|e| format!("{name}: {e}"))
            })
            .collect()
    }

    /// Regenerates the summary from the persisted logs alone.
    pub fn summarize(&self) -> io::Result<RunSummary> {
        let suite = self.load_suite()?;
        let manifest = self.load_manifest()?;
        let logs = self.load_logs(&manifest);
        Ok(summarize(&suite, &manifest, &logs))
    }
}

fn component_name(id: &str) -> &str {
    match id {
        "C1" => "Perception",
        "C2" => "Planning",
        "C3" => "Control",
        "C4" => "Vehicle and sensors (simulator)",
        _ => "Component",
    }
}

fn anchor(id: &str) -> String {
    id.to_ascii_lowercase().replace(['.', ' '], "-")
}

fn render_report(
    suite: &Suite,
    scores: &ScoreTable,
    logs: &[&CaseLog],
    results: &[VerificationResult],
    unscored: &[Unscored],
) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Verification report: {}\n", suite.name);
    let _ = writeln!(
        md,
        "Scenario `{}`, base seed {}, {} of {} cases scored.\n",
        suite.scenario, suite.base_seed, scores.cases, scores.expected_cases
    );
    if let Some(w) = scores.coverage_warning() {
        let _ = writeln!(md, "> **Coverage warning:** {w}.\n");
    }
    if !unscored.is_empty() {
        let _ = writeln!(md, "## Unscored cases\n");
        for u in unscored {
            let _ = writeln!(md, "- case {:03}: {}", u.case_id, u.reason);
        }
        md.push('\n');
    }
    let aborted = results.iter().filter(|r| r.status == RunStatus::Aborted).count();
    let timeout = results.iter().filter(|r| r.status == RunStatus::Timeout).count();
    let _ = writeln!(md, "Runs: {} completed, {timeout} timeout, {aborted} aborted.\n", results.len() - aborted - timeout);

    let _ = writeln!(md, "## Requirements\n");
    let _ = writeln!(md, "| Requirement | Statement | Component | Verification | Pass rate |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for r in &suite.requirements {
        let rate = scores.cell(&r.verified_by, "Total").map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            md,
            "| <a id=\"{}\"></a>{} {} | {} | [{}](#{}) | [{}](#{}) | {rate} |",
            anchor(&r.id),
            r.id,
            r.summary,
            r.description,
            r.implemented_by,
            anchor(&r.implemented_by),
            r.verified_by,
            anchor(&r.verified_by),
        );
    }
    let _ = writeln!(md, "\n### Components\n");
    let mut components: Vec<&str> = suite.requirements.iter().map(|r| r.implemented_by.as_str()).collect();
    components.sort_unstable();
    components.dedup();
    for c in components {
        let reqs: Vec<String> = suite
            .requirements
            .iter()
            .filter(|r| r.implemented_by == c)
            .map(|r| format!("[{}](#{})", r.id, anchor(&r.id)))
            .collect();
        let _ = writeln!(md, "- <a id=\"{}\"></a>**{c}** {}: implements {}", anchor(c), component_name(c), reqs.join(", "));
    }
    let _ = writeln!(md, "\n### Verifications\n");
    for r in &suite.requirements {
        let _ = writeln!(
            md,
            "- <a id=\"{}\"></a>**{}** checks [{}](#{}): `{}` {} {}",
            anchor(&r.verified_by),
            r.verified_by,
            r.id,
            anchor(&r.id),
            r.metric.kpi_name(),
            r.comparator.symbol(),
            r.threshold
        );
    }

    let _ = writeln!(md, "\n## Scores\n");
    md.push_str(&score_markdown(scores));

    let _ = writeln!(md, "\n## Cases\n");
    for (log, result) in logs.iter().zip(results) {
        md.push_str(&case_section(log, result));
    }
    md
}

fn score_markdown(t: &ScoreTable) -> String {
    let mut md = format!("| | {} |\n", t.columns.join(" | "));
    let _ = writeln!(md, "|---|{}", "---:|".repeat(t.columns.len()));
    for r in &t.rows {
        let cells: Vec<String> = r.cells.iter().map(|c| c.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())).collect();
        let label = if r.label == "All" { r.label.clone() } else { format!("[{}](#{})", r.label, anchor(&r.label)) };
        let _ = writeln!(md, "| {label} | {} |", cells.join(" | "));
    }
    let counts: Vec<String> = t.counts.iter().map(usize::to_string).collect();
    let _ = writeln!(md, "| cases | {} |", counts.join(" | "));
    md
}

fn case_section(log: &CaseLog, r: &VerificationResult) -> String {
    let mut md = String::new();
    let id = r.case_id;
    let _ = writeln!(md, "### <a id=\"case-{id:03}\"></a>Case {id:03} {}\n", r.tuple);
    let mut status = format!("Status **{}** ({})", r.status.as_str(), r.termination);
    if let Some(f) = &r.fault {
        let _ = write!(status, ", fault: {f}");
    }
    let _ = writeln!(md, "{status}. Seed {}.\n", log.case.seed);
    let verdicts: Vec<String> = r
        .verdicts
        .iter()
        .map(|v| format!("[{}](#{}) {}", v.verification, anchor(&v.verification), if v.pass { "pass" } else { "FAIL" }))
        .collect();
    let _ = writeln!(md, "Verdicts: {}; all: {}.\n", verdicts.join(", "), if r.all_pass { "pass" } else { "FAIL" });
    let k = &r.kpis;
    let _ = writeln!(md, "| KPI | value |\n|---|---:|");
    for (name, value) in [
        ("n_det_total", k.n_det_total.to_string()),
        ("n_col_total", k.n_col_total.to_string()),
        ("peak_velocity (m/s)", format!("{:.3}", k.peak_velocity)),
        ("peak_accel (m/s²)", format!("{:.3}", k.peak_accel)),
        ("peak_decel (m/s²)", format!("{:.3}", k.peak_decel)),
        ("peak_jerk (m/s³)", format!("{:.3}", k.peak_jerk)),
        ("mean_velocity_error (m/s)", format!("{:.3}", k.mean_velocity_error)),
        ("final_dtc (m)", format!("{:.2}", k.final_dtc)),
        ("stop_achieved", k.stop_achieved.to_string()),
        ("duration (s)", format!("{:.1}", k.duration)),
    ] {
        let _ = writeln!(md, "| {name} | {value} |");
    }
    md.push('\n');
    if !log.ticks.is_empty() {
        md.push_str(&case_plots(log));
        md.push('\n');
    }
    md
}

fn case_plots(log: &CaseLog) -> String {
    let t: Vec<f64> = log.ticks.iter().map(|r| r.time).collect();
    let col = |f: fn(&super::kpi::TickRecord) -> f64| -> Vec<f64> { log.ticks.iter().map(f).collect() };
    let speed = col(|r| r.speed);
    let (accel, jerk) = motion_profile(&speed, &t);
    let zip = |y: &[f64]| -> Vec<(f64, f64)> { t.iter().copied().zip(y.iter().copied()).collect() };
    let xy: Vec<(f64, f64)> = log.ticks.iter().map(|r| (r.x, r.y)).collect();
    let panels = [
        Plot { title: "Position", x_label: "x (m)", y_label: "y (m)", series: vec![("path", BLUE, xy)] },
        Plot {
            title: "Velocity",
            x_label: "t (s)",
            y_label: "m/s",
            series: vec![
                ("true", BLUE, zip(&speed)),
                ("estimate", ORANGE, zip(&col(|r| r.v_est))),
                ("reference", GREEN, zip(&col(|r| r.v_ref))),
            ],
        },
        Plot {
            title: "Velocity error",
            x_label: "t (s)",
            y_label: "m/s",
            series: vec![("v_ref − v_est", RED, zip(&col(|r| r.v_ref - r.v_est)))],
        },
        Plot { title: "Acceleration", x_label: "t (s)", y_label: "m/s²", series: vec![("smoothed", BLUE, zip(&accel))] },
        Plot { title: "Jerk", x_label: "t (s)", y_label: "m/s³", series: vec![("jerk", BLUE, zip(&jerk))] },
        Plot { title: "Distance to collision", x_label: "t (s)", y_label: "m", series: vec![("dtc", BLUE, zip(&col(|r| r.dtc)))] },
        Plot {
            title: "Detections",
            x_label: "t (s)",
            y_label: "count",
            series: vec![
                ("n_det", BLUE, zip(&col(|r| r.n_det as f64))),
                ("filtered", ORANGE, zip(&col(|r| r.n_filtered as f64))),
            ],
        },
        Plot { title: "AEB", x_label: "t (s)", y_label: "level", series: vec![("aeb", RED, zip(&col(|r| r.aeb)))] },
        Plot {
            title: "Throttle and brake",
            x_label: "t (s)",
            y_label: "command",
            series: vec![("throttle", GREEN, zip(&col(|r| r.throttle))), ("brake", RED, zip(&col(|r| r.brake)))],
        },
        Plot { title: "Steering", x_label: "t (s)", y_label: "command", series: vec![("steering", BLUE, zip(&col(|r| r.steering)))] },
        Plot {
            title: "Lights",
            x_label: "t (s)",
            y_label: "on",
            series: vec![
                ("headlights", ORANGE, zip(&col(|r| f64::from(u8::from(r.headlights))))),
                ("DRL", BLUE, zip(&col(|r| f64::from(u8::from(r.drl))))),
            ],
        },
        Plot { title: "Collisions", x_label: "t (s)", y_label: "count", series: vec![("n_col", RED, zip(&col(|r| f64::from(r.n_col))))] },
    ];
    let mut out = String::from("<div>\n");
    for p in &panels {
        out.push_str(&p.svg());
    }
    out.push_str("</div>\n");
    out
}

const BLUE: &str = "#1f77b4";
const ORANGE: &str = "#ff7f0e";
const GREEN: &str = "#2ca02c";
const RED: &str = "#d62728";
const MAX_POINTS: usize = 240;

struct Plot {
    title: &'static str,
    x_label: &'static str,
    y_label: &'static str,
    series: Vec<(&'static str, &'static str, Vec<(f64, f64)>)>,
}

impl Plot {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flat_map(|s| s.2.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| if b - a < 1e-9 { (a - 0.5, b + 0.5) } else { (a, b) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        (x0, x1, y0, y1)
    }

    fn svg(&self) -> String {
        let (w, h, ml, mr, mt, mb) = (300.0, 180.0, 46.0, 8.0, 20.0, 30.0);
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
        let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"9\">\
             <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\
             <text x=\"{}\" y=\"12\" text-anchor=\"middle\" font-size=\"11\">{}</text>\
             <rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>",
            w / 2.0,
            self.title,
            w - ml - mr,
            h - mt - mb
        );
        let _ = write!(
            s,
            "<text x=\"{ml}\" y=\"{}\">{}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\
             <text x=\"4\" y=\"{}\">{}</text>",
            h - mb + 11.0,
            num(x0),
            w - mr,
            h - mb + 11.0,
            num(x1),
            (ml + w - mr) / 2.0,
            h - 4.0,
            self.x_label,
            ml - 3.0,
            h - mb,
            num(y0),
            ml - 3.0,
            mt + 8.0,
            num(y1),
            mt + 20.0,
            self.y_label
        );
        for (i, (label, color, pts)) in self.series.iter().enumerate() {
            let step = pts.len().div_ceil(MAX_POINTS).max(1);
            let mut path = String::new();
            let picked = pts.iter().step_by(step).chain(pts.last().filter(|_| (pts.len() - 1) % step != 0));
            for &(x, y) in picked.filter(|p| p.0.is_finite() && p.1.is_finite()) {
                let _ = write!(path, "{:.1},{:.1} ", sx(x), sy(y));
            }
            let _ = write!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\
                 <text x=\"{}\" y=\"{}\" fill=\"{color}\" text-anchor=\"end\">{label}</text>",
                path.trim_end(),
                w - mr - 2.0,
                mt + 10.0 + 10.0 * i as f64
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn num(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
