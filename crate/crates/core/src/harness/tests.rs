use std::sync::{Arc, Mutex};

use proptest::prelude::*;

use super::*;
use crate::autonomy::{Control, Perception, Planning, VariantConfig};

fn tuple(c1: Perception, c2: Planning, c3: Control, p1: TodPreset, p2: WeatherPreset) -> CaseTuple {
    CaseTuple { variant: VariantConfig { perception: c1, planning: c2, control: c3 }, time_of_day: p1, weather: p2 }
}

fn anchor() -> CaseTuple {
    tuple(Perception::C1_2, Planning::C2_1, Control::C3_2, TodPreset::P1_1, WeatherPreset::P2_2)
}

/// Axis indices (C1, C2, C3, P1, P2) of 0-based `index` when digits are
/// taken fastest-first in `order`. Independent of `Axes::decode`.
fn digits_in_order(index: usize, order: [usize; 5]) -> [usize; 5] {
    let sizes = [2, 2, 2, 4, 4];
    let mut rest = index;
    let mut d = [0; 5];
    for axis in order {
        d[axis] = rest % sizes[axis];
        rest /= sizes[axis];
    }
    d
}

fn tuple_digits(t: &CaseTuple) -> [usize; 5] {
    let pos = |label: &str| label.rsplit('.').next().unwrap().parse::<usize>().unwrap() - 1;
    [
        pos(t.variant.perception.label()),
        pos(t.variant.planning.label()),
        pos(t.variant.control.label()),
        pos(t.time_of_day.label()),
        pos(t.weather.label()),
    ]
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = vec![];
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut p in permutations(rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

#[test]
fn orderings_reproducing_anchor() {
    let want = tuple_digits(&anchor());
    let matches: Vec<Vec<usize>> = permutations(vec![0, 1, 2, 3, 4])
        .into_iter()
        .filter(|p| digits_in_order(14, [p[0], p[1], p[2], p[3], p[4]]) == want)
        .collect();
    assert_eq!(matches.len(), 2, "{matches:?}");
    // C2, C3, C1, P2, P1 is the frozen order; C2, C1, C3, P2, P1 also fits.
    assert!(matches.contains(&vec![1, 2, 0, 4, 3]));
    assert!(matches.contains(&vec![1, 0, 2, 4, 3]));
    // The "C3 fastest, then C2, C1, P2, P1" order does not.
    assert_eq!(
        digits_in_order(14, [2, 1, 0, 4, 3]),
        tuple_digits(&tuple(Perception::C1_2, Planning::C2_2, Control::C3_1, TodPreset::P1_1, WeatherPreset::P2_2))
    );
    let axes = Axes::default();
    for id in 1..=128u32 {
        let t = axes.decode(id).unwrap();
        assert_eq!(tuple_digits(&t), digits_in_order(id as usize - 1, [1, 2, 0, 4, 3]));
    }
}

#[test]
fn case_15_is_the_anchor() {
    let t = Axes::default().decode(15).unwrap();
    assert_eq!(t, anchor());
    assert_eq!(t.to_string(), "{C1.2, C2.1, C3.2, P1.1, P2.2}");
}

#[test]
fn default_axes_give_a_128_case_bijection() {
    let axes = Axes::default();
    let cases = generate_matrix(&axes, 7, 90.0, BUILTIN_SCENARIO).unwrap();
    assert_eq!(cases.len(), 128);
    let mut seen = std::collections::HashSet::new();
    for (i, c) in cases.iter().enumerate() {
        assert_eq!(c.case_id as usize, i + 1);
        assert_eq!(axes.encode(&c.tuple), Some(c.case_id));
        assert!(seen.insert(c.tuple));
    }
    assert_eq!(axes.decode(0), None);
    assert_eq!(axes.decode(129), None);
}

#[test]
fn single_value_axes_give_one_case() {
    let axes = Axes {
        perception: vec![Perception::C1_1],
        planning: vec![Planning::C2_2],
        control: vec![Control::C3_1],
        time_of_day: vec![TodPreset::P1_3],
        weather: vec![WeatherPreset::P2_4],
    };
    let cases = generate_matrix(&axes, 1, 90.0, BUILTIN_SCENARIO).unwrap();
    assert_eq!(cases.len(), 1);
    assert_eq!(cases[0].case_id, 1);
}

#[test]
fn empty_axis_is_an_error() {
    let axes = Axes { weather: vec![], ..Axes::default() };
    assert!(generate_matrix(&axes, 1, 90.0, BUILTIN_SCENARIO).is_err());
}

#[test]
fn seeds_are_stable_and_distinct() {
    let a = generate_matrix(&Axes::default(), 2024, 90.0, BUILTIN_SCENARIO).unwrap();
    let b = generate_matrix(&Axes::default(), 2024, 90.0, BUILTIN_SCENARIO).unwrap();
    assert_eq!(a, b);
    let seeds: std::collections::HashSet<u64> = a.iter().map(|c| c.seed).collect();
    assert_eq!(seeds.len(), 128);
    assert_ne!(case_seed(2024, 1), case_seed(2025, 1));
}

#[test]
fn filters_count() {
    let cases = Suite::default().cases().unwrap();
    let count = |f: &str| f.parse::<CaseFilter>().unwrap().apply(cases.clone()).len();
    assert_eq!(count("C3=C3.2"), 64);
    assert_eq!(count("P1=P1.4"), 32);
    assert_eq!(count("C1=C1.2,P1=P1.1|P1.2"), 32);
    assert_eq!(count("15"), 1);
    assert_eq!(count("id=1-8"), 8);
    assert_eq!(count(""), 128);
    assert!("C9=C9.1".parse::<CaseFilter>().is_err());
    assert!("C1=C2.1".parse::<CaseFilter>().is_err());
    assert!("id=x".parse::<CaseFilter>().is_err());
}

fn kpis(n_det: u64, jerk: f64, err: f64, n_col: u32) -> KpiSummary {
    KpiSummary { n_det_total: n_det, peak_jerk: jerk, mean_velocity_error: err, n_col_total: n_col, ..Default::default() }
}

fn passes(v: &[Verdict]) -> Vec<bool> {
    v.iter().map(|v| v.pass).collect()
}

#[test]
fn reported_kpis_pass_all() {
    let reqs = default_requirements();
    assert_eq!(passes(&verify(&kpis(130, 4.94, -0.11, 0), &reqs, true)), vec![true; 4]);
}

#[test]
fn boundaries_flip_only_their_verdict() {
    let reqs = default_requirements();
    let cases = [
        (kpis(1, 4.94, -0.11, 0), 0),
        (kpis(130, 6.0, -0.11, 0), 1),
        (kpis(130, 4.94, 1.0 + 1e-12, 0), 2),
        (kpis(130, 4.94, -1.0 - 1e-12, 0), 2),
        (kpis(130, 4.94, -0.11, 1), 3),
    ];
    for (k, flipped) in cases {
        let p = passes(&verify(&k, &reqs, true));
        for (i, pass) in p.iter().enumerate() {
            assert_eq!(*pass, i != flipped, "{k:?}");
        }
    }
    assert!(passes(&verify(&kpis(2, 0.0, 1.0, 0), &reqs, true)).iter().all(|p| *p));
    assert!(passes(&verify(&kpis(130, 4.94, -0.11, 0), &reqs, false)).iter().all(|p| !*p));
}

fn synthetic(cases: &[TestCase], pass: impl Fn(&TestCase, usize) -> bool) -> Vec<VerificationResult> {
    let reqs = default_requirements();
    cases
        .iter()
        .map(|c| {
            let verdicts: Vec<Verdict> = reqs
                .iter()
                .enumerate()
                .map(|(i, r)| Verdict { verification: r.verified_by.clone(), requirement: r.id.clone(), pass: pass(c, i) })
                .collect();
            VerificationResult {
                case_id: c.case_id,
                tuple: c.tuple,
                status: RunStatus::Completed,
                termination: "stopped".into(),
                all_pass: verdicts.iter().all(|v| v.pass),
                verdicts,
                kpis: KpiSummary::default(),
                fault: None,
            }
        })
        .collect()
}

fn v_ids() -> Vec<String> {
    Suite::default().verification_ids()
}

#[test]
fn c1_2_only_v1_oracle() {
    let cases = Suite::default().cases().unwrap();
    let results = synthetic(&cases, |c, i| i != 0 || c.tuple.variant.perception == Perception::C1_2);
    let t = score_matrix(&results, &v_ids(), 128);
    assert_eq!(t.cell("V1", "C1.2"), Some(1.0));
    assert_eq!(t.cell("V1", "C1.1"), Some(0.0));
    assert_eq!(t.cell("V1", "Total"), Some(0.5));
    assert_eq!(t.cell("V2", "Total"), Some(1.0));
    assert_eq!(t.cell("All", "C1.1"), Some(0.0));
    let expected_counts = [64, 64, 64, 64, 64, 64, 32, 32, 32, 32, 32, 32, 32, 32, 128];
    assert_eq!(t.counts, expected_counts);
    assert!(t.coverage_warning().is_none());
}

#[test]
fn all_pass_gives_ones() {
    let cases = Suite::default().cases().unwrap();
    let t = score_matrix(&synthetic(&cases, |_, _| true), &v_ids(), 128);
    assert!(t.rows.iter().all(|r| r.cells.iter().all(|c| *c == Some(1.0))));
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().all(|l| l.split(',').count() == 16));
}

#[test]
fn empty_results_warn() {
    let t = score_matrix(&[], &v_ids(), 128);
    assert!(t.coverage_warning().is_some());
    assert!(t.rows.iter().all(|r| r.cells.iter().all(Option::is_none)));
}

fn check_partitions(t: &ScoreTable) {
    let groups: [&[&str]; 5] = [
        &["C1.1", "C1.2"],
        &["C2.1", "C2.2"],
        &["C3.1", "C3.2"],
        &["P1.1", "P1.2", "P1.3", "P1.4"],
        &["P2.1", "P2.2", "P2.3", "P2.4"],
    ];
    let count = |c: &str| t.counts[t.columns.iter().position(|x| x == c).unwrap()] as f64;
    for row in &t.rows {
        let total = t.cell(&row.label, "Total").unwrap();
        for g in groups {
            let weighted: f64 = g.iter().map(|c| t.cell(&row.label, c).unwrap() * count(c)).sum::<f64>()
                / g.iter().map(|c| count(c)).sum::<f64>();
            assert!((weighted - total).abs() <= 1e-12, "{} {g:?}", row.label);
        }
    }
    for (c, _) in t.columns.iter().enumerate() {
        let min = t.rows[..4].iter().map(|r| r.cells[c].unwrap()).fold(f64::INFINITY, f64::min);
        assert!(t.rows[4].cells[c].unwrap() <= min);
    }
}

proptest! {
    #[test]
    fn score_partitions_and_dominance(bits in proptest::collection::vec(any::<u8>(), 128)) {
        let cases = Suite::default().cases().unwrap();
        let results = synthetic(&cases, |c, i| bits[c.case_id as usize - 1] >> i & 1 == 1);
        check_partitions(&score_matrix(&results, &v_ids(), 128));
    }

    #[test]
    fn decode_encode_round_trip(id in 1u32..=128) {
        let axes = Axes::default();
        prop_assert_eq!(axes.encode(&axes.decode(id).unwrap()), Some(id));
    }
}

fn nominal_case(suite: &Suite) -> TestCase {
    let t = tuple(Perception::C1_2, Planning::C2_1, Control::C3_2, TodPreset::P1_1, WeatherPreset::P2_1);
    let id = suite.axes.encode(&t).unwrap();
    suite.cases().unwrap().into_iter().find(|c| c.case_id == id).unwrap()
}

fn run(suite: &Suite, case: &TestCase, opts: &ExecOptions, tracker: &InstanceTracker) -> CaseOutcome {
    let scenario = Arc::new(suite.load_scenario().unwrap());
    execute_test(case, suite, scenario, opts, tracker)
}

#[test]
fn nominal_case_stops_before_herd() {
    let suite = Suite::default();
    let tracker = InstanceTracker::default();
    let out = run(&suite, &nominal_case(&suite), &ExecOptions::default(), &tracker);
    let k = &out.result.kpis;
    assert_eq!(out.result.status, RunStatus::Completed, "{}", out.result.termination);
    assert_eq!(out.result.termination, "stopped");
    assert!(k.stop_achieved);
    assert_eq!(k.n_col_total, 0);
    assert!(k.final_dtc > 5.0, "{k:?}");
    assert!(out.result.all_pass, "{k:?}");
    assert!(k.duration <= 90.0);
    assert_eq!(tracker.live(), 0);
}

#[test]
fn rerun_gives_identical_log() {
    let suite = Suite::default();
    let case = &suite.cases().unwrap()[14];
    let tracker = InstanceTracker::default();
    let a = run(&suite, case, &ExecOptions::default(), &tracker).log.to_jsonl();
    let b = run(&suite, case, &ExecOptions::default(), &tracker).log.to_jsonl();
    assert_eq!(a, b);
}

#[test]
fn socket_matches_loopback() {
    let suite = Suite::default();
    let case = &suite.cases().unwrap()[14];
    let tracker = InstanceTracker::default();
    let a = run(&suite, case, &ExecOptions::default(), &tracker);
    let socket = ExecOptions { transport: TransportKind::Socket, ..Default::default() };
    let b = run(&suite, case, &socket, &tracker);
    assert_eq!(a.result, b.result);
    assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());
}

#[test]
fn injected_fault_aborts_and_releases() {
    let suite = Suite::default();
    let case = &suite.cases().unwrap()[0];
    let tracker = InstanceTracker::default();
    let opts = ExecOptions { fault_at_tick: Some(20), ..Default::default() };
    let out = run(&suite, case, &opts, &tracker);
    assert_eq!(out.result.status, RunStatus::Aborted);
    assert!(out.result.verdicts.iter().all(|v| !v.pass));
    assert!(!out.result.all_pass);
    assert!(out.result.fault.is_some());
    assert_eq!(out.log.ticks.len(), 20);
    assert_eq!(tracker.live(), 0);
}

#[test]
fn short_cap_times_out_and_fails_all() {
    let suite = Suite::default();
    let mut case = suite.cases().unwrap()[0].clone();
    case.max_duration = 1.0;
    let tracker = InstanceTracker::default();
    let out = run(&suite, &case, &ExecOptions::default(), &tracker);
    assert_eq!(out.result.status, RunStatus::Timeout);
    assert_eq!(out.log.ticks.len(), 11);
    assert!(out.result.verdicts.iter().all(|v| !v.pass));
    assert_eq!(tracker.live(), 0);
}

#[test]
fn log_round_trips_and_detects_truncation() {
    let suite = Suite::default();
    let mut case = suite.cases().unwrap()[3].clone();
    case.max_duration = 2.0;
    let tracker = InstanceTracker::default();
    let out = run(&suite, &case, &ExecOptions::default(), &tracker);
    let text = out.log.to_jsonl();
    let parsed = CaseLog::parse(&text).unwrap();
    assert_eq!(parsed, out.log);
    assert_eq!(parsed.result(&suite.requirements), out.result);
    let cut = &text[..text.len() / 2];
    assert!(CaseLog::parse(cut).is_err());
    assert!(CaseLog::parse("not json\n").is_err());
}

#[test]
fn parallel_equals_serial_and_accounting_holds() {
    let suite = Suite { termination: Termination { max_duration: 8.0, ..Termination::default() }, ..Suite::default() };
    let cases: Vec<TestCase> = "id=9-20".parse::<CaseFilter>().unwrap().apply(suite.cases().unwrap());
    let tracker = InstanceTracker::default();
    let seen = Mutex::new(Vec::new());
    let progress = |s: SchedulerStatus, _: Option<&CaseOutcome>| seen.lock().unwrap().push(s);
    let par = run_cases(&suite, &cases, &ExecOptions::default(), 4, &tracker, &progress).unwrap();
    let ser = run_cases(&suite, &cases, &ExecOptions::default(), 1, &tracker, &|_, _| {}).unwrap();
    for (a, b) in par.iter().zip(&ser) {
        assert_eq!(a.result, b.result);
        assert_eq!(a.log.to_jsonl(), b.log.to_jsonl());
    }
    let seen = seen.into_inner().unwrap();
    assert_eq!(seen.len(), 2 * cases.len());
    assert!(seen.iter().all(|s| s.total() == cases.len() && s.running <= 4));
    assert_eq!(seen.last().unwrap().completed, cases.len());
    assert_eq!(par.iter().map(|o| o.result.case_id).collect::<Vec<_>>(), (9..=20).collect::<Vec<_>>());
    assert_eq!(tracker.live(), 0);
    assert!(run_cases(&suite, &cases, &ExecOptions::default(), 0, &tracker, &|_, _| {}).is_err());
}

#[test]
fn report_from_disk_matches_live_and_flags_corrupt_log() {
    let suite = Suite { termination: Termination { max_duration: 3.0, ..Termination::default() }, ..Suite::default() };
    let cases: Vec<TestCase> = "id=1-4".parse::<CaseFilter>().unwrap().apply(suite.cases().unwrap());
    let dir = tempfile::tempdir().unwrap();
    let run_dir = RunDir::new(dir.path());
    let manifest = Manifest { suite: suite.name.clone(), case_ids: cases.iter().map(|c| c.case_id).collect() };
    run_dir.begin(&suite, &manifest).unwrap();
    let tracker = InstanceTracker::default();
    let outs = run_cases(&suite, &cases, &ExecOptions::default(), 2, &tracker, &|_, o| {
        if let Some(o) = o {
            run_dir.write_case(o).unwrap();
        }
    })
    .unwrap();
    let logs: Vec<Result<CaseLog, String>> = outs.iter().map(|o| Ok(o.log.clone())).collect();
    let live = summarize(&suite, &manifest, &logs);
    run_dir.write_summary(&live).unwrap();
    assert!(live.report.contains("4 of 4 cases scored"));
    assert_eq!(live.report.matches("### <a id=\"case-").count(), 4);
    assert!(live.scores.coverage_warning().is_none());

    let again = run_dir.summarize().unwrap();
    assert_eq!(again.report, live.report);
    assert_eq!(again.scores.to_csv(), live.scores.to_csv());
    assert_eq!(std::fs::read_to_string(dir.path().join("report.md")).unwrap(), live.report);

    let path = run_dir.log_path(3);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 3]).unwrap();
    let broken = run_dir.summarize().unwrap();
    assert_eq!(broken.results.unscored.len(), 1);
    assert_eq!(broken.results.unscored[0].case_id, 3);
    assert_eq!(broken.results.results.len(), 3);
    assert!(broken.report.contains("case 003: case_003.jsonl"));
    assert!(broken.scores.coverage_warning().is_some());
}

#[test]
fn report_links_every_requirement() {
    let suite = Suite::default();
    let summary = summarize(&suite, &Manifest { suite: suite.name.clone(), case_ids: vec![] }, &[]);
    assert!(summary.report.contains("Coverage warning"));
    for r in &suite.requirements {
        assert!(summary.report.contains(&format!("<a id=\"{}\"></a>", r.id.to_lowercase())));
        assert!(summary.report.contains(&format!("[{}](#{})", r.implemented_by, r.implemented_by.to_lowercase())));
        assert!(summary.report.contains(&format!("[{}](#{})", r.verified_by, r.verified_by.to_lowercase())));
    }
}
