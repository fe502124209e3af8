//! Closed-form vehicle sub-models composed by the integrator.
//!
//! Steering sign convention: positive steering turns the vehicle to the
//! right, so the right wheel is the inner wheel and the right side of the
//! differential loses torque.

use serde::{Deserialize, Serialize};

use super::config::{VehicleConfig, REVERSE_GEAR};
use crate::error::{ConfigError, ConfigResult, SimError};

/// Calibration speed of the braking distance (60 mph).
pub const BRAKE_CALIBRATION_SPEED: f64 = 26.8224;

const METERS_PER_MILE: f64 = 1609.344;
const METERS_PER_INCH: f64 = 0.0254;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialAggregates {
    pub total_mass: f64,
    pub com: [f64; 3],
    /// Per-axis second moment of the corner masses about the center of mass.
    pub moi: [f64; 3],
}

pub fn compute_inertial_aggregates(
    corner_mass: &[f64],
    corner_positions: &[[f64; 3]],
) -> ConfigResult<InertialAggregates> {
    if corner_mass.len() != 4 || corner_positions.len() != 4 {
        return Err(ConfigError::Invalid("expected four corners".into()));
    }
    let total_mass: f64 = corner_mass.iter().sum();
    if total_mass <= 0.0 {
        return Err(ConfigError::ZeroMass);
    }
    let mut com = [0.0; 3];
    for (m, x) in corner_mass.iter().zip(corner_positions) {
        for k in 0..3 {
            com[k] += m * x[k];
        }
    }
    com.iter_mut().for_each(|c| *c /= total_mass);
    let mut moi = [0.0; 3];
    for (m, x) in corner_mass.iter().zip(corner_positions) {
        for k in 0..3 {
            let d = x[k] - com[k];
            moi[k] += m * d * d;
        }
    }
    Ok(InertialAggregates { total_mass, com, moi })
}

pub fn suspension_stiffness(config: &VehicleConfig, corner: usize) -> f64 {
    let w = config.natural_frequency[corner];
    config.corner_sprung_mass[corner] * w * w
}

pub fn suspension_damping(config: &VehicleConfig, corner: usize) -> f64 {
    let k = suspension_stiffness(config, corner);
    2.0 * config.damping_ratio[corner] * (k * config.corner_sprung_mass[corner]).sqrt()
}

/// Spring-damper force for a corner; positive deflection is compression.
pub fn suspension_force(corner: usize, deflection: f64, rate: f64, config: &VehicleConfig) -> f64 {
    suspension_damping(config, corner) * rate + suspension_stiffness(config, corner) * deflection
}

/// First-order lag used as the throttle smoothing operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderLag {
    pub value: f64,
}

impl FirstOrderLag {
    /// Exact discretization of `ẏ = (u − y)/τ` over `dt`; `τ <= 0` tracks instantly.
    pub fn update(&mut self, input: f64, time_constant: f64, dt: f64) -> f64 {
        if time_constant <= 0.0 {
            self.value = input;
        } else {
            let alpha = 1.0 - (-dt / time_constant).exp();
            self.value += (input - self.value) * alpha;
        }
        self.value
    }
}

/// Total powertrain torque for an already-smoothed throttle.
pub fn powertrain_torque(
    smoothed_throttle: f64,
    engine_rpm: f64,
    gear: i32,
    config: &VehicleConfig,
) -> ConfigResult<f64> {
    let ratio = config.gear_ratio(gear)?;
    Ok(config.engine_torque(engine_rpm) * ratio * config.final_drive_ratio * smoothed_throttle.clamp(0.0, 1.0))
}

/// Engine speed the transmission would impose for a mean wheel speed.
pub fn engine_rpm_target(mean_wheel_rpm: f64, gear_ratio: f64, config: &VehicleConfig) -> f64 {
    config.idle_rpm + mean_wheel_rpm.abs() * config.final_drive_ratio * gear_ratio
}

/// Engine speed implied by road speed with no slip, evaluated in the
/// imperial units of the shift-schedule formula (mph, tire radius in inches).
pub fn transmission_rpm(speed: f64, gear_ratio: f64, config: &VehicleConfig) -> f64 {
    let v_mph = speed.abs() * 3600.0 / METERS_PER_MILE;
    let r_tire_in = config.tire_radius / METERS_PER_INCH;
    v_mph * 5280.0 * 12.0 / (60.0 * 2.0 * std::f64::consts::PI * r_tire_in)
        * config.final_drive_ratio
        * gear_ratio
}

/// One smoothing step of the engine speed toward its target, floored at idle.
pub fn update_engine_rpm(
    engine_rpm: f64,
    mean_wheel_rpm: f64,
    gear: i32,
    config: &VehicleConfig,
    dt: f64,
) -> f64 {
    let ratio = config.gear_ratio(gear).unwrap_or(0.0);
    let target = engine_rpm_target(mean_wheel_rpm, ratio, config);
    let mut lag = FirstOrderLag { value: engine_rpm };
    lag.update(target, config.engine_smoothing_time, dt).max(config.idle_rpm)
}

/// RPM-band shift schedule with hysteresis.
///
/// Holds the current gear while its predicted engine speed stays inside
/// `[shift_down_rpm, shift_up_rpm]`; otherwise steps one gear up or down.
pub fn select_gear(current: i32, speed: f64, reverse: bool, config: &VehicleConfig) -> i32 {
    if reverse {
        return REVERSE_GEAR;
    }
    let gears = config.forward_gears();
    let lowest = gears[0];
    let Some(pos) = gears.iter().position(|&g| g == current) else {
        return lowest;
    };
    let ratio = config.gear_ratio(current).unwrap_or(1.0);
    let rpm = transmission_rpm(speed, ratio, config);
    if rpm > config.shift_up_rpm && pos + 1 < gears.len() {
        gears[pos + 1]
    } else if rpm < config.shift_down_rpm && pos > 0 {
        // Only drop if the lower gear does not immediately over-rev.
        let lower = gears[pos - 1];
        let lower_rpm = transmission_rpm(speed, config.gear_ratio(lower).unwrap_or(1.0), config);
        if lower_rpm < config.shift_up_rpm {
            lower
        } else {
            current
        }
    } else {
        current
    }
}

/// Per-corner share of the total torque according to the drive layout.
pub fn split_torque(total: f64, config: &VehicleConfig) -> [f64; 4] {
    let share = match config.drive_config {
        super::config::DriveConfig::Awd => total / 4.0,
        _ => total / 2.0,
    };
    std::array::from_fn(|i| if config.drive_config.drives(i) { share } else { 0.0 })
}

/// Left/right torque after the steering-dependent differential drop.
pub fn differential_torque(tau_out: f64, steering: f64, config: &VehicleConfig) -> (f64, f64) {
    let neg = steering.min(0.0).abs();
    let pos = steering.max(0.0).abs();
    let left = tau_out * (1.0 - (config.diff_torque_drop * neg).clamp(0.0, 0.9));
    let right = tau_out * (1.0 - (config.diff_torque_drop * pos).clamp(0.0, 0.9));
    (left, right)
}

/// Brake torque capacity at one corner scaled by the pedal input.
///
/// The braking distance is a 60 mph calibration, so the capacity uses that
/// speed rather than the instantaneous one; `_speed` is accepted for the
/// interface only.
pub fn brake_torque(corner_mass: f64, _speed: f64, config: &VehicleConfig, brake_input: f64) -> f64 {
    let v = BRAKE_CALIBRATION_SPEED;
    brake_input.clamp(0.0, 1.0) * corner_mass * v * v / (2.0 * config.braking_distance_60mph)
        * config.brake_disk_radius
}

/// Left and right road-wheel angles for a steering input.
pub fn ackermann_angles(steering: f64, config: &VehicleConfig) -> Result<(f64, f64), SimError> {
    if steering.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(SimError::Domain(format!("steering {steering} outside (-pi/2, pi/2)")));
    }
    let t = steering.tan();
    let l2 = 2.0 * config.wheelbase;
    let wt = config.track_width * t;
    let (den_l, den_r) = (l2 + wt, l2 - wt);
    if den_l <= 0.0 || den_r <= 0.0 {
        return Err(SimError::Domain(format!(
            "steering {steering} is geometrically impossible for this track/wheelbase"
        )));
    }
    Ok(((l2 * t / den_l).atan(), (l2 * t / den_r).atan()))
}

/// Maximum steering slew rate at the given speed.
pub fn steering_rate(speed: f64, config: &VehicleConfig) -> f64 {
    config.steer_sensitivity + config.steer_speed_factor * (speed / config.v_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DragCase {
    Max,
    Idle,
    Reverse,
    Otherwise,
}

/// Operating-condition selector for the air drag, in priority order.
pub fn drag_case(speed: f64, tau_out: f64, gear: i32, mean_wheel_rpm: f64, config: &VehicleConfig) -> DragCase {
    let v = speed.abs();
    if v >= config.v_max {
        DragCase::Max
    } else if tau_out == 0.0 {
        DragCase::Idle
    } else if v >= config.v_rev && gear == REVERSE_GEAR && mean_wheel_rpm < 0.0 {
        DragCase::Reverse
    } else {
        DragCase::Otherwise
    }
}

pub fn drag_magnitude(case: DragCase, config: &VehicleConfig) -> f64 {
    match case {
        DragCase::Max => config.drag_max,
        DragCase::Reverse => config.drag_rev,
        DragCase::Idle | DragCase::Otherwise => config.drag_idle,
    }
}

/// Signed drag force along the body x axis, opposing the longitudinal speed.
///
/// Below 0.1 m/s the force is scaled down linearly so a vehicle at rest
/// feels no drag.
pub fn aero_drag(speed: f64, tau_out: f64, gear: i32, mean_wheel_rpm: f64, config: &VehicleConfig) -> f64 {
    let f = drag_magnitude(drag_case(speed, tau_out, gear, mean_wheel_rpm, config), config);
    -f * (speed / 0.1).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::config::DriveConfig;
    use std::f64::consts::PI;

    #[test]
    fn symmetric_corners_put_com_at_center() {
        let cfg = VehicleConfig::default();
        let agg = compute_inertial_aggregates(&[300.0; 4], &cfg.corner_positions()).unwrap();
        assert_eq!(agg.total_mass, 1200.0);
        for c in agg.com {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn com_shifts_toward_heavier_front() {
        let pos = [[1.35, 0.8, 0.0], [1.35, -0.8, 0.0], [-1.65, 0.8, 0.0], [-1.65, -0.8, 0.0]];
        let agg = compute_inertial_aggregates(&[500.0, 500.0, 400.0, 400.0], &pos).unwrap();
        assert_eq!(agg.total_mass, 1800.0);
        let expected = (500.0 * 1.35 * 2.0 + 400.0 * -1.65 * 2.0) / 1800.0;
        assert!((agg.com[0] - expected).abs() < 1e-12);
        assert!((agg.com[0] - 0.016_666_666_666_666_67).abs() < 1e-12);
    }

    #[test]
    fn single_mass_sits_at_its_corner() {
        let pos = [[1.0, 2.0, 0.5], [0.0; 3], [0.0; 3], [0.0; 3]];
        let agg = compute_inertial_aggregates(&[10.0, 0.0, 0.0, 0.0], &pos).unwrap();
        assert_eq!(agg.com, [1.0, 2.0, 0.5]);
        assert_eq!(agg.moi, [0.0; 3]);
    }

    #[test]
    fn zero_mass_is_rejected() {
        let cfg = VehicleConfig::default();
        assert_eq!(
            compute_inertial_aggregates(&[0.0; 4], &cfg.corner_positions()),
            Err(ConfigError::ZeroMass)
        );
    }

    #[test]
    fn suspension_force_matches_stiffness_formula() {
        let mut cfg = VehicleConfig::default();
        cfg.corner_sprung_mass[0] = 450.0;
        cfg.natural_frequency[0] = 2.0 * PI;
        cfg.damping_ratio[0] = 0.5;
        assert_eq!(suspension_force(0, 0.0, 0.0, &cfg), 0.0);
        let k = 450.0 * (2.0 * PI) * (2.0 * PI);
        assert!((suspension_force(0, 0.1, 0.0, &cfg) - 0.1 * k).abs() < 1e-9);
        assert!((suspension_force(0, 0.1, 0.0, &cfg) - 1776.5).abs() < 0.1);
        let damped = suspension_force(0, 0.0, 0.2, &cfg);
        cfg.damping_ratio[0] = 1.0;
        assert!((suspension_force(0, 0.0, 0.2, &cfg) - 2.0 * damped).abs() < 1e-9);
        assert!((suspension_force(0, 0.1, 0.0, &cfg) - 0.1 * k).abs() < 1e-9);
    }

    #[test]
    fn throttle_lag_rises_monotonically_to_full_torque() {
        let mut cfg = VehicleConfig::default();
        cfg.engine_torque_map = vec![[0.0, 120.0], [8000.0, 120.0]];
        cfg.gear_ratios.push(crate::dynamics::config::GearRatio { gear: 5, ratio: 2.0 });
        let mut lag = FirstOrderLag::default();
        assert_eq!(powertrain_torque(lag.value, 2000.0, 5, &cfg).unwrap(), 0.0);
        let mut prev = 0.0;
        for _ in 0..400 {
            let tau = powertrain_torque(lag.update(1.0, 0.25, 0.02), 2000.0, 5, &cfg).unwrap();
            assert!(tau > prev);
            assert!(tau <= 840.0);
            prev = tau;
        }
        assert!((prev - 840.0).abs() < 1e-6);
        assert!((powertrain_torque(1.0, 2000.0, 5, &cfg).unwrap() - 840.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_gear_in_powertrain() {
        let cfg = VehicleConfig::default();
        assert!(powertrain_torque(1.0, 2000.0, 9, &cfg).is_err());
    }

    #[test]
    fn engine_rpm_target_and_idle_floor() {
        let mut cfg = VehicleConfig::default();
        cfg.final_drive_ratio = 3.5;
        assert_eq!(engine_rpm_target(300.0, 2.0, &cfg), 3000.0);
        assert_eq!(update_engine_rpm(900.0, 0.0, 1, &cfg, 0.02), 900.0);
        assert!(update_engine_rpm(500.0, 0.0, 1, &cfg, 0.02) >= cfg.idle_rpm);
    }

    #[test]
    fn imperial_transmission_formula_matches_wheel_speed() {
        let cfg = VehicleConfig::default();
        let speed = 7.3;
        let wheel_rpm = speed / (2.0 * PI * cfg.tire_radius) * 60.0;
        let from_wheels = wheel_rpm * cfg.final_drive_ratio * 2.0;
        assert!((transmission_rpm(speed, 2.0, &cfg) - from_wheels).abs() < 1e-9);
    }

    #[test]
    fn gear_schedule() {
        let cfg = VehicleConfig::default();
        assert_eq!(select_gear(1, 0.0, false, &cfg), 1);
        // 18 m/s in first: 18/(2π·0.4)·60·3.5·3 ≈ 4512 rpm > 4500.
        assert_eq!(select_gear(1, 18.0, false, &cfg), 2);
        assert_eq!(select_gear(1, 17.9, false, &cfg), 1);
        let mut g = 2;
        for _ in 0..50 {
            g = select_gear(g, 8.0, false, &cfg);
        }
        assert_eq!(g, select_gear(g, 8.0, false, &cfg));
        assert_eq!(select_gear(3, 1.0, true, &cfg), REVERSE_GEAR);
    }

    #[test]
    fn torque_split_by_layout() {
        let mut cfg = VehicleConfig::default();
        cfg.drive_config = DriveConfig::Awd;
        assert_eq!(split_torque(840.0, &cfg), [210.0; 4]);
        cfg.drive_config = DriveConfig::Rwd;
        assert_eq!(split_torque(840.0, &cfg), [0.0, 0.0, 420.0, 420.0]);
        cfg.drive_config = DriveConfig::Fwd;
        assert_eq!(split_torque(840.0, &cfg), [420.0, 420.0, 0.0, 0.0]);
        assert_eq!(split_torque(0.0, &cfg), [0.0; 4]);
    }

    #[test]
    fn differential_drop_and_clamp() {
        let mut cfg = VehicleConfig::default();
        assert_eq!(differential_torque(200.0, 0.0, &cfg), (200.0, 200.0));
        cfg.diff_torque_drop = 2.0;
        let (l, r) = differential_torque(200.0, 0.3, &cfg);
        assert_eq!(l, 200.0);
        assert!((r - 80.0).abs() < 1e-12);
        cfg.diff_torque_drop = 3.0;
        let (l, r) = differential_torque(200.0, -0.5, &cfg);
        assert!((l - 20.0).abs() < 1e-12);
        assert_eq!(r, 200.0);
    }

    #[test]
    fn brake_capacity() {
        let mut cfg = VehicleConfig::default();
        cfg.braking_distance_60mph = 36.0;
        cfg.brake_disk_radius = 0.15;
        assert_eq!(brake_torque(450.0, 10.0, &cfg, 0.0), 0.0);
        let full = brake_torque(450.0, 10.0, &cfg, 1.0);
        assert!((full - 674.3).abs() < 0.5, "{full}");
        assert_eq!(full, brake_torque(450.0, 0.0, &cfg, 1.0));
        cfg.brake_disk_radius = 0.30;
        assert!((brake_torque(450.0, 10.0, &cfg, 1.0) - 2.0 * full).abs() < 1e-9);
    }

    #[test]
    fn ackermann_convention_and_domain() {
        let mut cfg = VehicleConfig::default();
        cfg.wheelbase = 2.96;
        cfg.track_width = 1.58;
        assert_eq!(ackermann_angles(0.0, &cfg).unwrap(), (0.0, 0.0));
        let (l, r) = ackermann_angles(0.35, &cfg).unwrap();
        let t = 0.35f64.tan();
        assert!((l - (2.0 * 2.96 * t / (2.0 * 2.96 + 1.58 * t)).atan()).abs() < 1e-15);
        assert!((r - (2.0 * 2.96 * t / (2.0 * 2.96 - 1.58 * t)).atan()).abs() < 1e-15);
        assert!(l < 0.35 && 0.35 < r);
        let (ml, mr) = ackermann_angles(-0.35, &cfg).unwrap();
        assert_eq!((ml, mr), (-r, -l));
        cfg.track_width = 20.0;
        assert!(ackermann_angles(1.2, &cfg).is_err());
    }

    #[test]
    fn steering_rate_is_affine_in_speed() {
        let mut cfg = VehicleConfig::default();
        cfg.steer_sensitivity = 0.5;
        cfg.steer_speed_factor = -0.3;
        assert_eq!(steering_rate(0.0, &cfg), 0.5);
        assert!((steering_rate(cfg.v_max, &cfg) - 0.2).abs() < 1e-12);
        let mid = steering_rate(0.5 * cfg.v_max, &cfg);
        assert!((mid - 0.35).abs() < 1e-12);
    }

    #[test]
    fn drag_cases_follow_priority() {
        let cfg = VehicleConfig::default();
        assert_eq!(drag_case(cfg.v_max + 1.0, 10.0, 1, 100.0, &cfg), DragCase::Max);
        assert_eq!(drag_case(1.0, 0.0, 1, 10.0, &cfg), DragCase::Idle);
        assert_eq!(drag_case(cfg.v_rev + 0.5, 50.0, -1, -100.0, &cfg), DragCase::Reverse);
        assert_eq!(drag_case(2.0, 50.0, 1, 40.0, &cfg), DragCase::Otherwise);
        assert_eq!(aero_drag(0.0, 0.0, 1, 0.0, &cfg), 0.0);
        assert_eq!(aero_drag(cfg.v_max + 1.0, 5.0, 4, 100.0, &cfg), -cfg.drag_max);
        assert_eq!(aero_drag(-3.0, 5.0, -1, -100.0, &cfg), cfg.drag_idle);
    }

    #[test]
    fn drag_selector_matches_truth_table() {
        let cfg = VehicleConfig::default();
        for bits in 0..8u8 {
            let fast = bits & 1 != 0;
            let idle = bits & 2 != 0;
            let reversing = bits & 4 != 0;
            let speed = if fast { cfg.v_max + 0.5 } else if reversing { cfg.v_rev + 0.5 } else { 1.0 };
            let tau = if idle { 0.0 } else { 50.0 };
            let (gear, wheel) = if reversing { (-1, -80.0) } else { (1, 80.0) };
            let expected = if fast {
                DragCase::Max
            } else if idle {
                DragCase::Idle
            } else if reversing {
                DragCase::Reverse
            } else {
                DragCase::Otherwise
            };
            assert_eq!(drag_case(-speed, tau, gear, wheel, &cfg), expected, "bits {bits}");
        }
    }
}
