use serde::{Deserialize, Serialize};

use super::{Control, Planning};
use super::perception::Detection;
use crate::dynamics::VehicleConfig;
use crate::environment::{EnvironmentState, Scenario, Weather};

pub fn aeb_trigger(filtered: &[Detection], variant: Planning) -> f64 {
    match variant {
        Planning::C2_1 => {
            if filtered.is_empty() {
                0.0
            } else {
                1.0
            }
        }
        Planning::C2_2 => {
            let largest = filtered.iter().map(|d| d.size).fold(0.0, f64::max);
            (1e-4 * largest).clamp(0.0, 1.0)
        }
    }
}

pub fn velocity_profile(aeb: f64) -> f64 {
    if aeb >= 0.9 {
        0.0
    } else {
        0.3 / (aeb + 0.1)
    }
}

/// Encoder tick rate clamped to ±30 ticks/s, converted to m/s.
pub fn encoder_speed(ticks: i64, prev_ticks: i64, dt: f64, config: &VehicleConfig) -> f64 {
    let rate = ((ticks - prev_ticks) as f64 / dt).clamp(-30.0, 30.0);
    rate * std::f64::consts::TAU * config.tire_radius / config.encoder_ppr
}

/// Mean of the per-wheel encoder speeds.
pub fn encoder_velocity(ticks: &[i64; 4], prev_ticks: &[i64; 4], dt: f64, config: &VehicleConfig) -> f64 {
    (0..4).map(|i| encoder_speed(ticks[i], prev_ticks[i], dt, config)).sum::<f64>() / 4.0
}

/// Trapezoidal integration of longitudinal acceleration.
pub fn integrate_accel(prev_velocity: f64, accel: f64, prev_accel: f64, dt: f64) -> f64 {
    prev_velocity + 0.5 * (accel + prev_accel) * dt
}

/// Weight of the IMU estimate in the blend.
pub const FUSION_ALPHA: f64 = 0.02;

pub fn fuse_velocity(imu_velocity: f64, encoder_velocity: f64) -> f64 {
    FUSION_ALPHA * imu_velocity + (1.0 - FUSION_ALPHA) * encoder_velocity
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Brake per m/s of overspeed on the PID variant.
    pub kb: f64,
    pub brake_deadband: f64,
    pub integral_limit: f64,
    /// Mean encoder rate (ticks/s) treated as rolling back.
    pub hold_threshold: f64,
    pub lookahead: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            kp: 0.25,
            ki: 0.05,
            kd: 0.01,
            kb: 0.2,
            brake_deadband: 0.1,
            integral_limit: 4.0,
            hold_threshold: 10.0,
            lookahead: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidMemory {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

pub const BANG_BANG_LEVEL: f64 = 0.4;
pub const PID_THROTTLE_MAX: f64 = 0.5;
pub const PID_BRAKE_MAX: f64 = 0.4;

/// Throttle and brake for a speed error `v_ref − v_est`.
pub fn control(v_ref: f64, v_est: f64, variant: Control, gains: &ControlGains, pid: &mut PidMemory, dt: f64) -> (f64, f64) {
    let err = v_ref - v_est;
    match variant {
        Control::C3_1 => {
            if err > 0.0 {
                (BANG_BANG_LEVEL, 0.0)
            } else {
                (0.0, BANG_BANG_LEVEL)
            }
        }
        Control::C3_2 => {
            pid.integral = (pid.integral + err * dt).clamp(-gains.integral_limit, gains.integral_limit);
            let derivative = pid.prev_error.map_or(0.0, |p| (err - p) / dt);
            pid.prev_error = Some(err);
            let raw = gains.kp * err + gains.ki * pid.integral + gains.kd * derivative;
            let throttle = bounded_throttle(raw);
            // A zero setpoint holds the brake at its cap so the vehicle stays stopped on grades.
            let brake = if v_ref <= 0.0 {
                PID_BRAKE_MAX
            } else if err < -gains.brake_deadband {
                (-gains.kb * err).min(PID_BRAKE_MAX)
            } else {
                0.0
            };
            (throttle, brake)
        }
    }
}

pub fn bounded_throttle(raw: f64) -> f64 {
    if raw.is_nan() {
        return 0.0;
    }
    raw.clamp(0.0, PID_THROTTLE_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Hold,
    Reverse,
}

/// Full brake when the wheels roll backwards against the commanded direction.
pub fn hill_hold(ticks: &[i64; 4], prev_ticks: &[i64; 4], dt: f64, direction: Direction, threshold: f64) -> f64 {
    let rate = (0..4).map(|i| (ticks[i] - prev_ticks[i]) as f64 / dt).sum::<f64>() / 4.0;
    match direction {
        Direction::Reverse => 0.0,
        Direction::Forward | Direction::Hold if rate < -threshold => 1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lights {
    pub headlights: bool,
    pub drl: bool,
}

pub const HEADLIGHT_ILLUMINATION: f64 = 0.3;

pub fn adaptive_lights(env: &EnvironmentState) -> Lights {
    let headlights = env.illumination < HEADLIGHT_ILLUMINATION || env.weather != Weather::Clear;
    Lights { headlights, drl: !headlights }
}

/// Pure pursuit on the road centerline. Returns a steering angle with the
/// vehicle convention (positive turns right).
pub fn pure_pursuit(x: f64, y: f64, yaw: f64, road: &Scenario, lookahead: f64, config: &VehicleConfig) -> f64 {
    let (s, _) = road.project(x, y);
    let target = road.road_query(s + lookahead).center;
    let (dx, dy) = (target[0] - x, target[1] - y);
    let local_y = -yaw.sin() * dx + yaw.cos() * dy;
    let dist2 = (dx * dx + dy * dy).max(1e-6);
    // Curvature of the arc through the target; positive to the left.
    let curvature = 2.0 * local_y / dist2;
    let steer = -(config.wheelbase * curvature).atan();
    steer.clamp(-config.max_steer, config.max_steer)
}
