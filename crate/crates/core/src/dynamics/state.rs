use serde::{Deserialize, Serialize};

use super::config::{VehicleConfig, GRAVITY};
use super::models::{suspension_stiffness, FirstOrderLag};
use crate::geometry::Pose;

/// Drive-by-wire command set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Commands {
    pub throttle: f64,
    pub steering: f64,
    pub brake: f64,
    pub handbrake: f64,
    #[serde(default)]
    pub reverse: bool,
}

impl Commands {
    /// Throttle, brake and handbrake in `[0, 1]`, steering within the lock.
    pub fn clamped(&self, config: &VehicleConfig) -> Self {
        let unit = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        let steer = if self.steering.is_nan() { 0.0 } else { self.steering };
        Self {
            throttle: unit(self.throttle),
            steering: steer.clamp(-config.max_steer, config.max_steer),
            brake: unit(self.brake),
            handbrake: unit(self.handbrake),
            reverse: self.reverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pose: Pose,
    /// World frame.
    pub linear_velocity: [f64; 3],
    /// Body-frame roll, pitch and yaw rates.
    pub angular_velocity: [f64; 3],
    pub wheel_rpm: [f64; 4],
    /// Compression relative to the unloaded spring, positive in bump.
    pub suspension_deflection: [f64; 4],
    pub suspension_rate: [f64; 4],
    pub engine_rpm: f64,
    pub gear: i32,
    /// Applied actuator positions (after smoothing and slew limits).
    pub throttle: f64,
    pub steering: f64,
    pub brake: f64,
    pub handbrake: f64,
    pub cumulative_wheel_revs: [f64; 4],
    pub sim_time: f64,
    /// Signed speed along the body x axis.
    pub speed: f64,
    /// Throttle after the smoothing operator.
    pub smoothed_throttle: FirstOrderLag,
    /// Ground height rate under each corner at the last step.
    pub ground_rate: [f64; 4],
}

impl VehicleState {
    /// At rest with every suspension corner in static equilibrium.
    pub fn at_rest(pose: Pose, config: &VehicleConfig) -> Self {
        let deflection = std::array::from_fn(|i| {
            config.corner_sprung_mass[i] * GRAVITY / suspension_stiffness(config, i)
        });
        Self {
            pose,
            linear_velocity: [0.0; 3],
            angular_velocity: [0.0; 3],
            wheel_rpm: [0.0; 4],
            suspension_deflection: deflection,
            suspension_rate: [0.0; 4],
            engine_rpm: config.idle_rpm,
            gear: config.forward_gears()[0],
            throttle: 0.0,
            steering: 0.0,
            brake: 0.0,
            handbrake: 0.0,
            cumulative_wheel_revs: [0.0; 4],
            sim_time: 0.0,
            speed: 0.0,
            smoothed_throttle: FirstOrderLag::default(),
            ground_rate: [0.0; 4],
        }
    }

    pub fn mean_wheel_rpm(&self) -> f64 {
        self.wheel_rpm.iter().sum::<f64>() / 4.0
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite_field(&self) -> Option<&'static str> {
        let p = self.pose.translation.vector;
        let q = self.pose.rotation.coords;
        let all = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !all(&[p.x, p.y, p.z]) {
            return Some("position");
        }
        if !all(&[q.x, q.y, q.z, q.w]) {
            return Some("orientation");
        }
        let checks: [(&'static str, &[f64]); 10] = [
            ("linear_velocity", &self.linear_velocity),
            ("angular_velocity", &self.angular_velocity),
            ("wheel_rpm", &self.wheel_rpm),
            ("suspension_deflection", &self.suspension_deflection),
            ("suspension_rate", &self.suspension_rate),
            ("cumulative_wheel_revs", &self.cumulative_wheel_revs),
            ("engine_rpm", std::slice::from_ref(&self.engine_rpm)),
            ("speed", std::slice::from_ref(&self.speed)),
            ("actuators", &[self.throttle, self.steering, self.brake, self.handbrake]),
            ("sim_time", std::slice::from_ref(&self.sim_time)),
        ];
        checks.iter().find(|(_, xs)| !all(xs)).map(|(name, _)| *name)
    }
}
