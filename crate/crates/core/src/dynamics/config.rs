//! Vehicle parameters.
//!
//! Every physical symbol of the vehicle model is a named field here so that a
//! TOML file can address it directly. Corner-indexed arrays use the order
//! front-left, front-right, rear-left, rear-right.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult};

pub const FRONT_LEFT: usize = 0;
pub const FRONT_RIGHT: usize = 1;
pub const REAR_LEFT: usize = 2;
pub const REAR_RIGHT: usize = 3;

pub const GRAVITY: f64 = 9.81;

/// Gear number of the reverse entry in `gear_ratios`.
pub const REVERSE_GEAR: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DriveConfig {
    Fwd,
    Rwd,
    Awd,
}

impl DriveConfig {
    pub fn drives(self, corner: usize) -> bool {
        match self {
            DriveConfig::Fwd => corner == FRONT_LEFT || corner == FRONT_RIGHT,
            DriveConfig::Rwd => corner == REAR_LEFT || corner == REAR_RIGHT,
            DriveConfig::Awd => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GearRatio {
    pub gear: i32,
    pub ratio: f64,
}

/// Anchor points of the tire friction curve, normalized by normal load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TireAnchors {
    pub origin: [f64; 2],
    pub extremum: [f64; 2],
    pub asymptote: [f64; 2],
    /// Initial stiffness multiplier: f'(S0) = stiffness_factor * F_e / S_e.
    #[serde(default = "default_stiffness_factor")]
    pub stiffness_factor: f64,
}

fn default_stiffness_factor() -> f64 {
    1.5
}

impl Default for TireAnchors {
    fn default() -> Self {
        Self {
            origin: [0.0, 0.0],
            extremum: [0.12, 0.9],
            asymptote: [0.6, 0.7],
            stiffness_factor: default_stiffness_factor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub corner_sprung_mass: [f64; 4],
    pub wheel_mass: f64,
    pub natural_frequency: [f64; 4],
    pub damping_ratio: [f64; 4],
    pub wheelbase: f64,
    pub track_width: f64,
    pub tire_radius: f64,
    pub final_drive_ratio: f64,
    pub gear_ratios: Vec<GearRatio>,
    /// Piecewise-linear engine torque curve as (rpm, N·m) knots, sorted by rpm.
    pub engine_torque_map: Vec<[f64; 2]>,
    pub idle_rpm: f64,
    pub throttle_smoothing_time: f64,
    pub diff_torque_drop: f64,
    pub brake_disk_radius: f64,
    pub braking_distance_60mph: f64,
    pub drive_config: DriveConfig,
    pub steer_sensitivity: f64,
    pub steer_speed_factor: f64,
    pub max_steer: f64,
    pub v_max: f64,
    pub v_rev: f64,
    pub drag_max: f64,
    pub drag_idle: f64,
    pub drag_rev: f64,
    pub encoder_ppr: f64,
    pub cumulative_gear_ratio: f64,

    #[serde(default)]
    pub tire: TireAnchors,
    #[serde(default = "default_shift_up")]
    pub shift_up_rpm: f64,
    #[serde(default = "default_shift_down")]
    pub shift_down_rpm: f64,
    /// Time constant of the engine-speed smoothing.
    #[serde(default = "default_engine_smoothing")]
    pub engine_smoothing_time: f64,
    /// Time constant of the brake pressure build-up; zero means instantaneous.
    #[serde(default)]
    pub brake_response_time: f64,
    #[serde(default = "default_front_overhang")]
    pub front_overhang: f64,
    #[serde(default = "default_rear_overhang")]
    pub rear_overhang: f64,
    #[serde(default = "default_body_width")]
    pub body_width: f64,
}

fn default_shift_up() -> f64 {
    4500.0
}
fn default_shift_down() -> f64 {
    1500.0
}
fn default_engine_smoothing() -> f64 {
    0.2
}
fn default_front_overhang() -> f64 {
    0.6
}
fn default_rear_overhang() -> f64 {
    0.5
}
fn default_body_width() -> f64 {
    1.9
}

impl Default for VehicleConfig {
    fn default() -> Self {
        let wn = 2.0 * std::f64::consts::PI * 1.6;
        Self {
            corner_sprung_mass: [280.0, 280.0, 260.0, 260.0],
            wheel_mass: 20.0,
            natural_frequency: [wn; 4],
            damping_ratio: [0.45; 4],
            wheelbase: 2.96,
            track_width: 1.58,
            tire_radius: 0.4,
            final_drive_ratio: 3.5,
            gear_ratios: vec![
                GearRatio { gear: -1, ratio: 3.2 },
                GearRatio { gear: 1, ratio: 3.0 },
                GearRatio { gear: 2, ratio: 2.0 },
                GearRatio { gear: 3, ratio: 1.4 },
                GearRatio { gear: 4, ratio: 1.0 },
            ],
            engine_torque_map: vec![
                [0.0, 120.0],
                [1000.0, 150.0],
                [3000.0, 200.0],
                [5000.0, 200.0],
                [7000.0, 150.0],
            ],
            idle_rpm: 900.0,
            throttle_smoothing_time: 0.25,
            diff_torque_drop: 0.5,
            brake_disk_radius: 0.15,
            braking_distance_60mph: 36.0,
            drive_config: DriveConfig::Awd,
            steer_sensitivity: 0.6,
            steer_speed_factor: -0.3,
            max_steer: 0.6,
            v_max: 20.0,
            v_rev: 4.0,
            drag_max: 6000.0,
            drag_idle: 60.0,
            drag_rev: 300.0,
            encoder_ppr: 16.0,
            cumulative_gear_ratio: 1.0,
            tire: TireAnchors::default(),
            shift_up_rpm: default_shift_up(),
            shift_down_rpm: default_shift_down(),
            engine_smoothing_time: default_engine_smoothing(),
            brake_response_time: 0.0,
            front_overhang: default_front_overhang(),
            rear_overhang: default_rear_overhang(),
            body_width: default_body_width(),
        }
    }
}

impl VehicleConfig {
    pub fn from_toml_str(text: &str) -> ConfigResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("vehicle config serializes")
    }

    pub fn validate(&self) -> ConfigResult<()> {
        let bad = |what: &str| Err(ConfigError::Invalid(what.to_string()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.corner_sprung_mass.iter().all(|&m| positive(m)) {
            return bad("corner_sprung_mass must be strictly positive");
        }
        if !self.natural_frequency.iter().all(|&w| positive(w)) {
            return bad("natural_frequency must be strictly positive");
        }
        if !self.damping_ratio.iter().all(|&z| z > 0.0 && z <= 2.0) {
            return bad("damping_ratio must lie in (0, 2]");
        }
        for (name, v) in [
            ("wheel_mass", self.wheel_mass),
            ("wheelbase", self.wheelbase),
            ("track_width", self.track_width),
            ("tire_radius", self.tire_radius),
            ("final_drive_ratio", self.final_drive_ratio),
            ("idle_rpm", self.idle_rpm),
            ("throttle_smoothing_time", self.throttle_smoothing_time),
            ("brake_disk_radius", self.brake_disk_radius),
            ("braking_distance_60mph", self.braking_distance_60mph),
            ("v_max", self.v_max),
            ("encoder_ppr", self.encoder_ppr),
            ("cumulative_gear_ratio", self.cumulative_gear_ratio),
        ] {
            if !positive(v) {
                return Err(ConfigError::Invalid(format!("{name} must be strictly positive")));
            }
        }
        if !self.gear_ratios.iter().any(|g| g.gear == REVERSE_GEAR) {
            return bad("gear_ratios needs a reverse entry (gear -1)");
        }
        if !self.gear_ratios.iter().any(|g| g.gear >= 1) {
            return bad("gear_ratios needs at least one forward gear");
        }
        if !self.gear_ratios.iter().all(|g| positive(g.ratio)) {
            return bad("gear ratios must be strictly positive");
        }
        if !(self.v_rev < self.v_max) {
            return bad("v_rev must be below v_max");
        }
        if !(self.max_steer > 0.0 && self.max_steer < std::f64::consts::FRAC_PI_2) {
            return bad("max_steer must lie in (0, pi/2)");
        }
        if self.engine_torque_map.is_empty()
            || self.engine_torque_map.windows(2).any(|w| w[1][0] <= w[0][0])
        {
            return bad("engine_torque_map must be non-empty with increasing rpm");
        }
        if self.shift_down_rpm >= self.shift_up_rpm {
            return bad("shift_down_rpm must be below shift_up_rpm");
        }
        if self.brake_response_time < 0.0 {
            return bad("brake_response_time must be non-negative");
        }
        let t = &self.tire;
        if !(t.origin[0] < t.extremum[0] && t.extremum[0] < t.asymptote[0]) {
            return bad("tire anchors need S0 < Se < Sa");
        }
        if t.extremum[1] < t.asymptote[1] {
            return bad("tire anchors need Fe >= Fa");
        }
        Ok(())
    }

    pub fn gear_ratio(&self, gear: i32) -> ConfigResult<f64> {
        self.gear_ratios
            .iter()
            .find(|g| g.gear == gear)
            .map(|g| g.ratio)
            .ok_or(ConfigError::UnknownGear(gear))
    }

    /// Forward gears in ascending order.
    pub fn forward_gears(&self) -> Vec<i32> {
        let mut gears: Vec<i32> = self
            .gear_ratios
            .iter()
            .map(|g| g.gear)
            .filter(|&g| g >= 1)
            .collect();
        gears.sort_unstable();
        gears
    }

    /// Engine torque at `rpm`, linearly interpolated and held flat past the ends.
    pub fn engine_torque(&self, rpm: f64) -> f64 {
        let map = &self.engine_torque_map;
        if rpm <= map[0][0] {
            return map[0][1];
        }
        for w in map.windows(2) {
            let ([r0, t0], [r1, t1]) = (w[0], w[1]);
            if rpm <= r1 {
                return t0 + (t1 - t0) * (rpm - r0) / (r1 - r0);
            }
        }
        map[map.len() - 1][1]
    }

    pub fn total_mass(&self) -> f64 {
        self.corner_sprung_mass.iter().sum::<f64>() + 4.0 * self.wheel_mass
    }

    pub fn wheel_inertia(&self) -> f64 {
        0.5 * self.wheel_mass * self.tire_radius * self.tire_radius
    }

    /// Corner positions in the body frame (x forward, y left) about the
    /// wheelbase midpoint.
    pub fn corner_positions(&self) -> [[f64; 3]; 4] {
        let (hl, hw) = (0.5 * self.wheelbase, 0.5 * self.track_width);
        [[hl, hw, 0.0], [hl, -hw, 0.0], [-hl, hw, 0.0], [-hl, -hw, 0.0]]
    }

    /// Distance from the pose origin to the front bumper.
    pub fn front_bumper_offset(&self) -> f64 {
        0.5 * self.wheelbase + self.front_overhang
    }

    pub fn rear_bumper_offset(&self) -> f64 {
        0.5 * self.wheelbase + self.rear_overhang
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips_through_toml() {
        let cfg = VehicleConfig::default();
        cfg.validate().unwrap();
        let back = VehicleConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_missing_reverse_gear() {
        let mut cfg = VehicleConfig::default();
        cfg.gear_ratios.retain(|g| g.gear != REVERSE_GEAR);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_out_of_range_damping_and_steer() {
        let mut cfg = VehicleConfig::default();
        cfg.damping_ratio[2] = 2.5;
        assert!(cfg.validate().is_err());
        let mut cfg = VehicleConfig::default();
        cfg.max_steer = 1.6;
        assert!(cfg.validate().is_err());
        let mut cfg = VehicleConfig::default();
        cfg.v_rev = cfg.v_max;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn engine_map_interpolates_and_holds() {
        let cfg = VehicleConfig::default();
        assert_eq!(cfg.engine_torque(500.0), 135.0);
        assert_eq!(cfg.engine_torque(4000.0), 200.0);
        assert_eq!(cfg.engine_torque(9000.0), 150.0);
        assert_eq!(cfg.engine_torque(-5.0), 120.0);
    }

    #[test]
    fn unknown_gear_is_a_config_error() {
        let cfg = VehicleConfig::default();
        assert_eq!(cfg.gear_ratio(7), Err(ConfigError::UnknownGear(7)));
    }
}
