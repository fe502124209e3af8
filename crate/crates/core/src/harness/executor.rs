use std::net::TcpListener;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kpi::TickRecord;
use super::log::CaseLog;
use super::matrix::TestCase;
use super::score::{RunStatus, VerificationResult};
use super::simulator::{InstanceTracker, Simulator};
use super::suite::Suite;
use crate::autonomy::{autonomy_tick, AutonomyState, SutContext, VehicleCommand};
use crate::bridge::{
    loopback_pair, serve, BridgeError, BridgeSettings, ClientSession, Endpoint, Handshake, TcpTransport, Transport,
    PROTOCOL_VERSION,
};
use crate::environment::Scenario;
use crate::error::ConfigError;
use crate::sensors::SensorFrame;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    Loopback,
    Socket,
}

impl FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loopback" => Ok(Self::Loopback),
            "socket" => Ok(Self::Socket),
            _ => Err(format!("unknown transport {s:?} (loopback | socket)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    pub transport: TransportKind,
    pub bridge: BridgeSettings,
    /// Simulator faults on this frame; for testing the abort path.
    pub fault_at_tick: Option<u64>,
}

/// Outcome of one case: the log it wrote and its verdicts.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub log: CaseLog,
    pub result: VerificationResult,
}

fn connect_pair(kind: TransportKind, bridge: &BridgeSettings, case_id: u32) -> Result<(Box<dyn Transport>, Box<dyn Transport>), BridgeError> {
    match kind {
        TransportKind::Loopback => {
            let (a, b) = loopback_pair();
            Ok((Box::new(a), Box::new(b)))
        }
        TransportKind::Socket => {
            // A fixed port is offset by the case id so parallel cases do not collide.
            let port = if bridge.port == 0 {
                0
            } else {
                bridge.port.checked_add((case_id - 1) as u16).ok_or_else(|| BridgeError::Protocol("port out of range".into()))?
            };
            let listener = TcpListener::bind(("127.0.0.1", port))?;
            let addr = listener.local_addr()?;
            let client = TcpTransport::connect(addr)?;
            let (stream, _) = listener.accept()?;
            Ok((Box::new(TcpTransport::from_stream(stream)?), Box::new(client)))
        }
    }
}

struct Termination {
    status: RunStatus,
    reason: String,
}

/// Runs one case to termination. Never panics on simulator faults; those
/// come back as an aborted result.
pub fn execute_test(
    case: &TestCase,
    suite: &Suite,
    scenario: Arc<Scenario>,
    opts: &ExecOptions,
    tracker: &InstanceTracker,
) -> CaseOutcome {
    let mut ticks = Vec::new();
    let end = run_loop(case, suite, scenario, opts, tracker, &mut ticks);
    let (status, termination, fault) = match end {
        Ok(t) => (t.status, t.reason, None),
        Err(e) => {
            log::warn!("case {} aborted: {e}", case.case_id);
            (RunStatus::Aborted, "fault".to_string(), Some(e))
        }
    };
    let log = CaseLog { case: case.clone(), suite: suite.name.clone(), ticks, status, termination, fault };
    let result = log.result(&suite.requirements);
    CaseOutcome { log, result }
}

fn run_loop(
    case: &TestCase,
    suite: &Suite,
    scenario: Arc<Scenario>,
    opts: &ExecOptions,
    tracker: &InstanceTracker,
    ticks: &mut Vec<TickRecord>,
) -> Result<Termination, String> {
    let timeout = opts.bridge.timeout;
    let session_id = u64::from(case.case_id);
    let (server_t, client_t) = connect_pair(opts.transport, &opts.bridge, case.case_id).map_err(|e| e.to_string())?;
    let mut sim = Simulator::new(scenario.clone(), suite.simulation.clone(), tracker)?;
    let server = thread::spawn(move || {
        let mut ep = Endpoint::new(server_t, session_id, timeout);
        serve(&mut ep, &mut sim)
        // `sim` drops here, releasing its instance slot.
    });
    let outcome = drive(case, suite, &scenario, opts, client_t, ticks);
    let served = server.join().map_err(|_| "simulator thread panicked".to_string())?;
    match (outcome, served) {
        (Ok(t), Ok(_)) => Ok(t),
        (Ok(_), Err(e)) => Err(format!("simulator: {e}")),
        (Err(e), _) => Err(e),
    }
}

fn drive(
    case: &TestCase,
    suite: &Suite,
    scenario: &Scenario,
    opts: &ExecOptions,
    transport: Box<dyn Transport>,
    ticks: &mut Vec<TickRecord>,
) -> Result<Termination, String> {
    let sim = &suite.simulation;
    let env = case.tuple.environment();
    let handshake = Handshake {
        version: PROTOCOL_VERSION,
        scenario_id: scenario.name.clone(),
        dt: sim.dt,
        control_period: sim.control_period,
        seed: case.seed,
        time_of_day: env.0,
        weather: env.1,
        fault_at_tick: opts.fault_at_tick,
    };
    let endpoint = Endpoint::new(transport, u64::from(case.case_id), opts.bridge.timeout);
    let mut client = ClientSession::connect(endpoint, handshake).map_err(|e| e.to_string())?;
    let vehicle = sim.vehicle_config();
    let ctx = SutContext { variant: case.tuple.variant, calibration: &suite.calibration, vehicle: &vehicle, road: scenario };
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let mut state = AutonomyState::default();
    let term = &suite.termination;
    let max_duration = case.max_duration.min(term.max_duration);
    let mut stopped_since: Option<f64> = None;
    loop {
        let frame = client.recv_frame().map_err(|e| e.to_string())?;
        let (command, next) = autonomy_tick(&frame, &ctx, &state, &mut rng, sim.control_period);
        state = next;
        ticks.push(record(&frame, &command, &state));
        if let Some(f) = &state.fault {
            let _ = client.send_command(command, true);
            return Err(format!("autonomy: {f}"));
        }
        let t = frame.sim_time;
        let stopped = frame.true_speed.abs() < term.stop_speed && state.aeb > 0.0;
        let since = if stopped { *stopped_since.get_or_insert(t) } else { f64::INFINITY };
        if !stopped {
            stopped_since = None;
        }
        let end = if term.end_on_collision && frame.n_col > 0 {
            Some(Termination { status: RunStatus::Completed, reason: "collision".into() })
        } else if t - since >= term.stop_hold - 1e-9 {
            Some(Termination { status: RunStatus::Completed, reason: "stopped".into() })
        } else if t >= max_duration - 1e-9 {
            Some(Termination { status: RunStatus::Timeout, reason: "max_duration".into() })
        } else {
            None
        };
        client.send_command(command, end.is_some()).map_err(|e| e.to_string())?;
        if let Some(end) = end {
            return Ok(end);
        }
    }
}

fn record(frame: &SensorFrame, cmd: &VehicleCommand, s: &AutonomyState) -> TickRecord {
    TickRecord {
        tick: frame.tick,
        time: frame.sim_time,
        x: frame.ins.x,
        y: frame.ins.y,
        yaw: frame.ins.yaw,
        speed: frame.true_speed,
        v_ref: s.v_ref,
        v_est: s.v_est,
        aeb: s.aeb,
        n_det: s.n_det,
        n_filtered: s.n_filtered,
        throttle: cmd.throttle,
        brake: cmd.brake,
        steering: cmd.steering,
        headlights: cmd.lights.headlights,
        drl: cmd.lights.drl,
        dtc: frame.dtc,
        n_col: frame.n_col,
        illumination: frame.env.illumination,
        weather: frame.env.weather,
        visible_objects: frame.camera_objects.iter().filter(|o| !o.occluded).count(),
        lidar_points: frame.lidar_pcd.len(),
        sut_fault: s.fault.clone(),
    }
}

/// Running, pending and completed counts; they always sum to the total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerStatus {
    pub pending: usize,
    pub running: usize,
    pub completed: usize,
}

impl SchedulerStatus {
    pub fn total(&self) -> usize {
        self.pending + self.running + self.completed
    }
}

/// Runs `cases` on `jobs` worker threads. `progress` is called under the
/// scheduler lock after every transition, with the finished case when there
/// is one. Outcomes come back in case order.
pub fn run_cases(
    suite: &Suite,
    cases: &[TestCase],
    opts: &ExecOptions,
    jobs: usize,
    tracker: &InstanceTracker,
    progress: &(dyn Fn(SchedulerStatus, Option<&CaseOutcome>) + Sync),
) -> Result<Vec<CaseOutcome>, ConfigError> {
    if jobs == 0 {
        return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
    }
    let scenario = Arc::new(suite.load_scenario()?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let status = Mutex::new(SchedulerStatus { pending: cases.len(), ..Default::default() });
    let transition = |f: &dyn Fn(&mut SchedulerStatus), outcome: Option<&CaseOutcome>| {
        let mut s = status.lock().expect("scheduler lock");
        f(&mut s);
        progress(*s, outcome);
    };
    let mut outcomes: Vec<CaseOutcome> = pool.install(|| {
        use rayon::prelude::*;
        cases
            .par_iter()
            .map(|case| {
                transition(
                    &|s| {
                        s.pending -= 1;
                        s.running += 1;
                    },
                    None,
                );
                let outcome = execute_test(case, suite, scenario.clone(), opts, tracker);
                transition(
                    &|s| {
                        s.running -= 1;
                        s.completed += 1;
                    },
                    Some(&outcome),
                );
                outcome
            })
            .collect()
    });
    outcomes.sort_by_key(|o| o.result.case_id);
    Ok(outcomes)
}

pub fn default_jobs() -> usize {
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
