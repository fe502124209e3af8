use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::suite::SimulationSettings;
use crate::autonomy::VehicleCommand;
use crate::bridge::{EnvCommand, FrameSource, Handshake};
use crate::dynamics::{Commands, Vehicle, VehicleState};
use crate::environment::{set_conditions, CollisionMonitor, EnvironmentState, Footprint, Scenario};
use crate::sensors::{
    add_ins_noise, encoder_ticks, ins_read, lidar_scan, project_objects, DbwFeedback, LidarParams, SensorFrame,
};

/// Live simulator count; the guard decrements it on drop.
#[derive(Debug, Clone, Default)]
pub struct InstanceTracker(Arc<AtomicUsize>);

impl InstanceTracker {
    pub fn live(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    fn acquire(&self) -> InstanceGuard {
        self.0.fetch_add(1, Ordering::SeqCst);
        InstanceGuard(self.0.clone())
    }
}

#[derive(Debug)]
struct InstanceGuard(Arc<AtomicUsize>);

impl Drop for InstanceGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Vehicle, sensors and world behind the bridge.
pub struct Simulator {
    vehicle: Vehicle,
    scenario: Arc<Scenario>,
    settings: SimulationSettings,
    lidar: LidarParams,
    footprint: Footprint,
    substeps: usize,
    state: VehicleState,
    env: EnvironmentState,
    pending_env: Option<EnvironmentState>,
    collisions: CollisionMonitor,
    prev_velocity: [f64; 3],
    rng: ChaCha8Rng,
    tick: u64,
    next_lidar_time: f64,
    fault_at: Option<u64>,
    _guard: InstanceGuard,
}

impl Simulator {
    pub fn new(scenario: Arc<Scenario>, settings: SimulationSettings, tracker: &InstanceTracker) -> Result<Self, String> {
        let substeps = settings.substeps().map_err(|e| e.to_string())?;
        let vehicle = Vehicle::new(settings.vehicle_config()).map_err(|e| e.to_string())?;
        let mut lidar = settings.lidar;
        lidar.mount = scenario.lidar_mount;
        lidar.validate().map_err(|e| e.to_string())?;
        let state = vehicle.spawn_on(&scenario);
        Ok(Self {
            footprint: Footprint::from_config(&vehicle.config),
            prev_velocity: state.linear_velocity,
            state,
            vehicle,
            scenario,
            lidar,
            substeps,
            env: set_conditions(12.0, crate::environment::Weather::Clear).expect("valid default"),
            pending_env: None,
            collisions: CollisionMonitor::default(),
            rng: ChaCha8Rng::seed_from_u64(0),
            tick: 0,
            next_lidar_time: 0.0,
            fault_at: None,
            settings,
            _guard: tracker.acquire(),
        })
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    fn frame(&mut self) -> SensorFrame {
        let period = self.settings.control_period;
        let mut ins = ins_read(&self.state, self.prev_velocity, period);
        add_ins_noise(&mut ins, &self.settings.ins_noise, &mut self.rng);
        self.prev_velocity = self.state.linear_velocity;
        let camera_pose = self.state.pose * self.scenario.camera_mount.pose();
        let camera_objects = project_objects(&self.scenario, &camera_pose, &self.settings.camera);
        let lidar_pcd = if self.state.sim_time + 1e-9 >= self.next_lidar_time {
            self.next_lidar_time += 1.0 / self.lidar.update_rate;
            lidar_scan(&self.scenario, &self.state.pose, &self.lidar)
        } else {
            Vec::new()
        };
        let cfg = &self.vehicle.config;
        SensorFrame {
            tick: self.tick,
            sim_time: self.state.sim_time,
            dbw_feedback: DbwFeedback::from_state(&self.state),
            encoder_ticks: std::array::from_fn(|i| encoder_ticks(self.state.cumulative_wheel_revs[i], cfg)),
            encoder_revs: self.state.cumulative_wheel_revs,
            ins,
            camera_objects,
            lidar_pcd,
            env: self.env,
            dtc: self.scenario.distance_to_collision(&self.state.pose, cfg.front_bumper_offset()),
            n_col: self.collisions.count,
            true_speed: self.state.speed,
        }
    }
}

impl FrameSource for Simulator {
    fn start(&mut self, h: &Handshake) -> Result<SensorFrame, String> {
        if h.scenario_id != self.scenario.name {
            return Err(format!("unknown scenario {}", h.scenario_id));
        }
        if h.dt != self.settings.dt || h.control_period != self.settings.control_period {
            return Err(format!(
                "timing mismatch: requested dt {} / period {}, simulator runs {} / {}",
                h.dt, h.control_period, self.settings.dt, self.settings.control_period
            ));
        }
        self.env = set_conditions(h.time_of_day, h.weather).map_err(|e| e.to_string())?;
        self.rng = ChaCha8Rng::seed_from_u64(h.seed ^ 0x5eed_0f_5e05);
        self.fault_at = h.fault_at_tick;
        self.collisions.update(&self.state.pose, &self.footprint, &self.scenario);
        Ok(self.frame())
    }

    fn apply_env(&mut self, e: &EnvCommand) -> Result<(), String> {
        self.pending_env = Some(set_conditions(e.time_of_day, e.weather).map_err(|e| e.to_string())?);
        Ok(())
    }

    fn advance(&mut self, command: &VehicleCommand) -> Result<SensorFrame, String> {
        if let Some(env) = self.pending_env.take() {
            self.env = env;
        }
        if self.fault_at == Some(self.tick + 1) {
            // Corrupt the state so the integrator reports it.
            self.state.linear_velocity[0] = f64::NAN;
        }
        let cmd = Commands {
            throttle: command.throttle,
            steering: command.steering,
            brake: command.brake,
            handbrake: command.handbrake,
            reverse: command.reverse,
        };
        for _ in 0..self.substeps {
            self.state = self
                .vehicle
                .step(&self.state, &cmd, &self.scenario.terrain, self.settings.dt)
                .map_err(|e| e.to_string())?;
            self.collisions.update(&self.state.pose, &self.footprint, &self.scenario);
        }
        self.tick += 1;
        Ok(self.frame())
    }
}

