//! Fixed-step integrator composing the sub-models.
//!
//! Wheel spin and vehicle speed are advanced together with a linearized
//! backward-Euler solve: the tire curve is very stiff near zero slip and an
//! explicit update would need microsecond steps. Brakes are Coulomb torques,
//! regularized to a steep viscous law below `BRAKE_STICK_SPEED` so a braked
//! wheel can hold the vehicle on a slope.

use super::config::{VehicleConfig, GRAVITY, REAR_LEFT, REAR_RIGHT, REVERSE_GEAR};
use super::models::*;
use super::spline::FrictionSpline;
use super::state::{Commands, VehicleState};
use crate::environment::Terrain;
use crate::error::{ConfigResult, SimError};
use crate::geometry;

/// Largest accepted step.
pub const MAX_DT: f64 = 0.05;
/// Slip denominator floor, m/s.
pub const SLIP_SPEED_FLOOR: f64 = 0.1;
/// Wheel speed (rad/s) below which a braked wheel is treated as sticking.
pub const BRAKE_STICK_SPEED: f64 = 0.01;
const NEWTON_ITERATIONS: usize = 3;

/// Immutable vehicle model: configuration plus derived quantities.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub config: VehicleConfig,
    pub spline: FrictionSpline,
    pub inertial: InertialAggregates,
}

impl Vehicle {
    pub fn new(config: VehicleConfig) -> ConfigResult<Self> {
        config.validate()?;
        let spline = FrictionSpline::from_anchors(&config.tire)?;
        let inertial = compute_inertial_aggregates(&config.corner_sprung_mass, &config.corner_positions())?;
        Ok(Self { config, spline, inertial })
    }

    /// Resting state at `(x, y)` with heading `yaw`, settled onto the terrain.
    pub fn spawn(&self, x: f64, y: f64, yaw: f64, terrain: &Terrain) -> VehicleState {
        let mut state = VehicleState::at_rest(geometry::planar_pose(x, y, 0.0, yaw), &self.config);
        let (pose, _) = self.terrain_pose(x, y, yaw, terrain);
        state.pose = pose;
        state
    }

    /// Spawns at the scenario's spawn point, heading along the road.
    pub fn spawn_on(&self, scenario: &crate::environment::Scenario) -> VehicleState {
        let [x, y, _] = geometry::position(&scenario.spawn_pose);
        self.spawn(x, y, geometry::yaw(&scenario.spawn_pose), &scenario.terrain)
    }

    fn corner_ground(&self, x: f64, y: f64, yaw: f64, terrain: &Terrain) -> [f64; 4] {
        let (c, s) = (yaw.cos(), yaw.sin());
        let corners = self.config.corner_positions();
        std::array::from_fn(|i| {
            let [px, py, _] = corners[i];
            terrain.height(x + c * px - s * py, y + s * px + c * py)
        })
    }

    /// Pose resting on the ground under the four contact patches.
    fn terrain_pose(&self, x: f64, y: f64, yaw: f64, terrain: &Terrain) -> (geometry::Pose, [f64; 4]) {
        let z = self.corner_ground(x, y, yaw, terrain);
        let cfg = &self.config;
        let front = 0.5 * (z[0] + z[1]);
        let rear = 0.5 * (z[2] + z[3]);
        let left = 0.5 * (z[0] + z[2]);
        let right = 0.5 * (z[1] + z[3]);
        // Positive pitch is nose down, positive roll lifts the left side.
        let pitch = ((rear - front) / cfg.wheelbase).atan();
        let roll = ((left - right) / cfg.track_width).atan();
        let mean = 0.25 * z.iter().sum::<f64>();
        (geometry::pose_from_euler([x, y, mean], roll, pitch, yaw), z)
    }

    pub fn step(
        &self,
        state: &VehicleState,
        commands: &Commands,
        terrain: &Terrain,
        dt: f64,
    ) -> Result<VehicleState, SimError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(SimError::BadTimeStep(dt));
        }
        if let Some(field) = state.non_finite_field() {
            return Err(SimError::NonFinite { field, time: state.sim_time });
        }
        let cfg = &self.config;
        let cmd = commands.clamped(cfg);
        let mut next = state.clone();

        // Actuators.
        next.throttle = cmd.throttle;
        let smoothed = next.smoothed_throttle.update(cmd.throttle, cfg.throttle_smoothing_time, dt);
        next.brake = FirstOrderLag { value: state.brake }.update(cmd.brake, cfg.brake_response_time, dt);
        next.handbrake = cmd.handbrake;
        let max_slew = steering_rate(state.speed.abs(), cfg).max(0.0) * dt;
        next.steering = (state.steering + (cmd.steering - state.steering).clamp(-max_slew, max_slew))
            .clamp(-cfg.max_steer, cfg.max_steer);

        // Powertrain.
        next.gear = select_gear(state.gear, state.speed, cmd.reverse, cfg);
        next.engine_rpm = update_engine_rpm(state.engine_rpm, state.mean_wheel_rpm(), next.gear, cfg, dt);
        let tau_total = powertrain_torque(smoothed, next.engine_rpm, next.gear, cfg)
            .map_err(|e| SimError::Domain(e.to_string()))?;
        let tau_total = if next.gear == REVERSE_GEAR { -tau_total } else { tau_total };
        let split = split_torque(tau_total, cfg);
        let mut drive = [0.0; 4];
        for (l, r) in [(0, 1), (2, 3)] {
            drive[l] = differential_torque(split[l], next.steering, cfg).0;
            drive[r] = differential_torque(split[r], next.steering, cfg).1;
        }

        // Loads.
        let (roll, pitch, yaw) = geometry::euler_zyx(&state.pose);
        let normal: [f64; 4] = std::array::from_fn(|i| {
            suspension_force(i, state.suspension_deflection[i], state.suspension_rate[i], cfg).max(0.0)
                + cfg.wheel_mass * GRAVITY
        });
        let mut brake_cap: [f64; 4] =
            std::array::from_fn(|i| brake_torque(cfg.corner_sprung_mass[i], state.speed.abs(), cfg, next.brake));
        for i in [REAR_LEFT, REAR_RIGHT] {
            brake_cap[i] += brake_torque(cfg.corner_sprung_mass[i], state.speed.abs(), cfg, next.handbrake);
        }
        let drag_mag = drag_magnitude(
            drag_case(state.speed, tau_total, next.gear, state.mean_wheel_rpm(), cfg),
            cfg,
        );
        let grade_force = self.inertial_mass() * GRAVITY * pitch.sin();

        let omega0: [f64; 4] = std::array::from_fn(|i| state.wheel_rpm[i] * std::f64::consts::PI / 30.0);
        let (omega, v) = self.solve_longitudinal(&omega0, state.speed, &drive, &brake_cap, &normal, drag_mag, grade_force, dt);

        // Planar kinematics from the Ackermann mean angle; positive steering turns right.
        let (dl, dr) = ackermann_angles(next.steering, cfg)?;
        let mean_angle = 0.5 * (dl + dr);
        let yaw_rate = -v * mean_angle.tan() / cfg.wheelbase;
        let new_yaw = geometry::wrap_angle(yaw + yaw_rate * dt);
        let heading = yaw + 0.5 * yaw_rate * dt;
        let p = geometry::position(&state.pose);
        let (x, y) = (p[0] + v * heading.cos() * dt, p[1] + v * heading.sin() * dt);

        let old_ground = self.corner_ground(p[0], p[1], yaw, terrain);
        let (pose, new_ground) = self.terrain_pose(x, y, new_yaw, terrain);
        for i in 0..4 {
            let rate = (new_ground[i] - old_ground[i]) / dt;
            let (d, r) = suspension_step(
                i,
                state.suspension_deflection[i],
                state.suspension_rate[i],
                old_ground[i],
                state.ground_rate[i],
                new_ground[i],
                rate,
                cfg,
                dt,
            );
            next.suspension_deflection[i] = d;
            next.suspension_rate[i] = r;
            next.ground_rate[i] = rate;
        }

        let (new_roll, new_pitch, _) = geometry::euler_zyx(&pose);
        next.angular_velocity = [(new_roll - roll) / dt, (new_pitch - pitch) / dt, yaw_rate];
        next.pose = pose;
        next.speed = v;
        next.linear_velocity = geometry::transform_vector(&next.pose, [v, 0.0, 0.0]);
        for i in 0..4 {
            next.wheel_rpm[i] = omega[i] * 30.0 / std::f64::consts::PI;
            next.cumulative_wheel_revs[i] += omega[i] * dt / std::f64::consts::TAU;
        }
        next.sim_time = state.sim_time + dt;
        if let Some(field) = next.non_finite_field() {
            return Err(SimError::NonFinite { field, time: next.sim_time });
        }
        Ok(next)
    }

    fn inertial_mass(&self) -> f64 {
        self.config.total_mass()
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_longitudinal(
        &self,
        omega0: &[f64; 4],
        v0: f64,
        drive: &[f64; 4],
        brake_cap: &[f64; 4],
        normal: &[f64; 4],
        drag_mag: f64,
        grade_force: f64,
        dt: f64,
    ) -> ([f64; 4], f64) {
        let cfg = &self.config;
        let r = cfg.tire_radius;
        let inertia = cfg.wheel_inertia();
        let mass = self.inertial_mass();
        // Drag: constant when moving, a viscous ramp near rest.
        let (drag0, drag1) = if v0.abs() >= SLIP_SPEED_FLOOR {
            (drag_mag * v0.signum(), 0.0)
        } else {
            (0.0, drag_mag / SLIP_SPEED_FLOOR)
        };

        let mut omega = *omega0;
        let mut v = v0;
        for _ in 0..NEWTON_ITERATIONS {
            // Tire force linearized about the current guess: F ≈ f0 + a·ω + b·v.
            let mut a = [0.0; 4];
            let mut b = [0.0; 4];
            let mut f0 = [0.0; 4];
            let den = v.abs().max(SLIP_SPEED_FLOOR);
            let dden = if v.abs() > SLIP_SPEED_FLOOR { v.signum() } else { 0.0 };
            for i in 0..4 {
                let slip = (omega[i] * r - v) / den;
                let force = self.spline.value(slip) * normal[i];
                // Past the peak the curve falls; keep that part explicit.
                let slope = self.spline.slope(slip).max(0.0) * normal[i];
                a[i] = slope * r / den;
                b[i] = slope * (-den - (omega[i] * r - v) * dden) / (den * den);
                f0[i] = force - a[i] * omega[i] - b[i] * v;
            }

            // Brake regimes: sliding (constant torque) or sticking (viscous).
            let mut sliding: [Option<f64>; 4] = std::array::from_fn(|i| {
                (omega0[i].abs() > BRAKE_STICK_SPEED).then(|| omega0[i].signum())
            });
            let mut solution = (omega, v);
            for _ in 0..6 {
                let mut d = [0.0; 4];
                let mut p = [0.0; 4];
                let mut q = [0.0; 4];
                for i in 0..4 {
                    let (t_const, c) = match sliding[i] {
                        Some(sign) => (brake_cap[i] * sign, 0.0),
                        None => (0.0, brake_cap[i] / BRAKE_STICK_SPEED),
                    };
                    d[i] = inertia / dt + r * a[i] + c;
                    p[i] = inertia * omega0[i] / dt + drive[i] - t_const - r * f0[i];
                    q[i] = r * b[i];
                }
                let mut lhs = mass / dt + drag1;
                let mut rhs = mass * v0 / dt - drag0 + grade_force;
                for i in 0..4 {
                    lhs += -b[i] + a[i] * q[i] / d[i];
                    rhs += f0[i] + a[i] * p[i] / d[i];
                }
                let v_new = rhs / lhs;
                let w_new: [f64; 4] = std::array::from_fn(|i| (p[i] - q[i] * v_new) / d[i]);
                solution = (w_new, v_new);
                let mut changed = false;
                for i in 0..4 {
                    if brake_cap[i] == 0.0 {
                        continue;
                    }
                    let want = match sliding[i] {
                        Some(sign) if w_new[i] * sign > BRAKE_STICK_SPEED => Some(sign),
                        Some(_) => None,
                        None if w_new[i].abs() > BRAKE_STICK_SPEED => Some(w_new[i].signum()),
                        None => None,
                    };
                    if want != sliding[i] {
                        sliding[i] = want;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            omega = solution.0;
            v = solution.1;
        }
        (omega, v)
    }
}

/// Backward-Euler update of one suspension corner.
///
/// The sprung corner height is `Z − d` for ground height `Z` and compression
/// `d`; ground heights and rates are given before and after the step.
#[allow(clippy::too_many_arguments)]
pub fn suspension_step(
    corner: usize,
    deflection: f64,
    rate: f64,
    ground: f64,
    ground_rate: f64,
    new_ground: f64,
    new_ground_rate: f64,
    config: &VehicleConfig,
    dt: f64,
) -> (f64, f64) {
    let m = config.corner_sprung_mass[corner];
    let k = suspension_stiffness(config, corner);
    let c = suspension_damping(config, corner);
    let z = ground - deflection;
    let zdot = ground_rate - rate;
    let zdot_new = (m * zdot / dt + k * (new_ground - z) + c * new_ground_rate - m * GRAVITY) / (m / dt + k * dt + c);
    let z_new = z + dt * zdot_new;
    (new_ground - z_new, new_ground_rate - zdot_new)
}

/// Free-function form of [`Vehicle::step`].
pub fn step(
    vehicle: &Vehicle,
    state: &VehicleState,
    commands: &Commands,
    terrain: &Terrain,
    dt: f64,
) -> Result<VehicleState, SimError> {
    vehicle.step(state, commands, terrain, dt)
}
