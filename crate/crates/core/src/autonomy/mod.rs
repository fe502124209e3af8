//! The system under test: perception, planning and control of an
//! emergency-braking lane follower.

mod control;
mod perception;

pub use control::*;
pub use perception::*;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleConfig, GRAVITY};
use crate::environment::Scenario;
use crate::sensors::SensorFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Perception {
    #[serde(rename = "C1.1")]
    C1_1,
    #[serde(rename = "C1.2")]
    C1_2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Planning {
    #[serde(rename = "C2.1")]
    C2_1,
    #[serde(rename = "C2.2")]
    C2_2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Control {
    #[serde(rename = "C3.1")]
    C3_1,
    #[serde(rename = "C3.2")]
    C3_2,
}

impl Perception {
    pub const ALL: [Perception; 2] = [Perception::C1_1, Perception::C1_2];
    pub fn label(self) -> &'static str {
        match self {
            Perception::C1_1 => "C1.1",
            Perception::C1_2 => "C1.2",
        }
    }
}

impl Planning {
    pub const ALL: [Planning; 2] = [Planning::C2_1, Planning::C2_2];
    pub fn label(self) -> &'static str {
        match self {
            Planning::C2_1 => "C2.1",
            Planning::C2_2 => "C2.2",
        }
    }
}

impl Control {
    pub const ALL: [Control; 2] = [Control::C3_1, Control::C3_2];
    pub fn label(self) -> &'static str {
        match self {
            Control::C3_1 => "C3.1",
            Control::C3_2 => "C3.2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantConfig {
    pub perception: Perception,
    pub planning: Planning,
    pub control: Control,
}

/// Calibration shared by every case of a suite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SutCalibration {
    pub perception: PerceptionCalibration,
    pub control: ControlGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutonomyState {
    pub n_det: u64,
    pub aeb: f64,
    pub v_ref: f64,
    pub v_est: f64,
    /// IMU-integrated velocity.
    pub v_imu: f64,
    pub prev_encoder_ticks: Option<[i64; 4]>,
    pub prev_accel: f64,
    pub pid: PidMemory,
    pub lights: Lights,
    /// Size of the filtered detection list on the last tick.
    pub n_filtered: usize,
    pub fault: Option<String>,
}

impl Default for AutonomyState {
    fn default() -> Self {
        Self {
            n_det: 0,
            aeb: 0.0,
            v_ref: velocity_profile(0.0),
            v_est: 0.0,
            v_imu: 0.0,
            prev_encoder_ticks: None,
            prev_accel: 0.0,
            pid: PidMemory::default(),
            lights: Lights::default(),
            n_filtered: 0,
            fault: None,
        }
    }
}

/// Actuator requests produced by one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleCommand {
    pub throttle: f64,
    pub steering: f64,
    pub brake: f64,
    pub handbrake: f64,
    pub reverse: bool,
    pub lights: Lights,
}

impl VehicleCommand {
    pub fn safe_stop(lights: Lights) -> Self {
        Self { brake: 1.0, lights, ..Self::default() }
    }
}

/// Longitudinal acceleration with the gravity projection removed.
pub fn longitudinal_accel(frame: &SensorFrame) -> f64 {
    frame.ins.accel[0] - GRAVITY * frame.ins.pitch.sin()
}

/// Updates the velocity estimate in `state` and returns it.
pub fn estimate_velocity(accel: f64, ticks: &[i64; 4], state: &mut AutonomyState, dt: f64, config: &VehicleConfig) -> f64 {
    let prev_ticks = state.prev_encoder_ticks.unwrap_or(*ticks);
    state.v_imu = integrate_accel(state.v_imu, accel, state.prev_accel, dt);
    state.prev_accel = accel;
    let v_enc = encoder_velocity(ticks, &prev_ticks, dt, config);
    state.v_est = fuse_velocity(state.v_imu, v_enc);
    state.v_est
}

/// Fixed inputs of the SUT for one run.
pub struct SutContext<'a> {
    pub variant: VariantConfig,
    pub calibration: &'a SutCalibration,
    pub vehicle: &'a VehicleConfig,
    pub road: &'a Scenario,
}

/// One control step. Returns the command and the successor state.
pub fn autonomy_tick<R: Rng>(
    frame: &SensorFrame,
    ctx: &SutContext,
    state: &AutonomyState,
    rng: &mut R,
    dt: f64,
) -> (VehicleCommand, AutonomyState) {
    let mut next = state.clone();
    next.lights = adaptive_lights(&frame.env);
    if !(dt > 0.0) || !dt.is_finite() {
        next.fault = Some(format!("bad control period {dt}"));
        return (VehicleCommand::safe_stop(next.lights), next);
    }

    let dets = perceive(&frame.camera_objects, &frame.env, ctx.variant.perception, &ctx.calibration.perception, rng);
    next.n_det += dets.len() as u64;
    let filtered = filter_detections(&dets);
    next.n_filtered = filtered.len();
    next.aeb = aeb_trigger(&filtered, ctx.variant.planning);
    next.v_ref = velocity_profile(next.aeb);

    let prev_ticks = state.prev_encoder_ticks.unwrap_or(frame.encoder_ticks);
    let v_est = estimate_velocity(longitudinal_accel(frame), &frame.encoder_ticks, &mut next, dt, ctx.vehicle);
    next.prev_encoder_ticks = Some(frame.encoder_ticks);

    let gains = &ctx.calibration.control;
    let (throttle, brake) = control(next.v_ref, v_est, ctx.variant.control, gains, &mut next.pid, dt);
    let direction = if next.v_ref > 0.0 { Direction::Forward } else { Direction::Hold };
    let hold = hill_hold(&frame.encoder_ticks, &prev_ticks, dt, direction, gains.hold_threshold);
    let ins = &frame.ins;
    let steering = pure_pursuit(ins.x, ins.y, ins.yaw, ctx.road, gains.lookahead, ctx.vehicle);

    let cmd = VehicleCommand {
        throttle,
        steering,
        brake: brake.max(hold),
        handbrake: 0.0,
        reverse: false,
        lights: next.lights,
    };
    let finite = [cmd.throttle, cmd.steering, cmd.brake, next.v_est, next.v_ref].iter().all(|x| x.is_finite());
    if !finite {
        next.fault = Some("non-finite value in the control pipeline".into());
        return (VehicleCommand::safe_stop(next.lights), next);
    }
    next.fault = None;
    (cmd, next)
}
