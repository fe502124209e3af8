//! Sensor feeds: actuator feedback, encoders, INS, camera, LiDAR.

mod camera;
mod lidar;

pub use camera::{project_objects, projection_matrix, to_pixel, view_transform, CameraIntrinsics, ProjectedObject};
pub use lidar::{lidar_scan, ray_cylinder, ray_direction, LidarParams};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleConfig, VehicleState, GRAVITY};
use crate::environment::EnvironmentState;
use crate::geometry;

/// Incremental encoder count for a wheel.
pub fn encoder_ticks(cumulative_revs: f64, config: &VehicleConfig) -> i64 {
    (config.encoder_ppr * config.cumulative_gear_ratio * cumulative_revs).floor() as i64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DbwFeedback {
    pub throttle: f64,
    pub steering: f64,
    pub brake: f64,
    pub handbrake: f64,
}

impl DbwFeedback {
    pub fn from_state(state: &VehicleState) -> Self {
        Self { throttle: state.throttle, steering: state.steering, brake: state.brake, handbrake: state.handbrake }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InsReading {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Body-frame acceleration including the gravity projection.
    pub accel: [f64; 3],
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub yaw_rate: f64,
}

/// Optional Gaussian noise on the INS channels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InsNoise {
    pub position: f64,
    pub angle: f64,
    pub accel: f64,
    pub rate: f64,
}

/// Pose, rates and body acceleration from two consecutive states.
///
/// Acceleration is the body-frame finite difference of world velocity plus
/// `Rᵀ·(0, 0, −g)`, so a level vehicle at rest reads `(0, 0, −g)`.
pub fn ins_read(state: &VehicleState, prev_velocity: [f64; 3], dt: f64) -> InsReading {
    let [x, y, z] = geometry::position(&state.pose);
    let (roll, pitch, yaw) = geometry::euler_zyx(&state.pose);
    let v = state.linear_velocity;
    let world_accel = [
        (v[0] - prev_velocity[0]) / dt,
        (v[1] - prev_velocity[1]) / dt,
        (v[2] - prev_velocity[2]) / dt - GRAVITY,
    ];
    let accel = state
        .pose
        .rotation
        .inverse_transform_vector(&nalgebra::Vector3::from(world_accel));
    InsReading {
        x,
        y,
        z,
        roll,
        pitch,
        yaw,
        accel: [accel.x, accel.y, accel.z],
        roll_rate: state.angular_velocity[0],
        pitch_rate: state.angular_velocity[1],
        yaw_rate: state.angular_velocity[2],
    }
}

pub fn add_ins_noise<R: Rng>(reading: &mut InsReading, noise: &InsNoise, rng: &mut R) {
    let mut jitter = |value: &mut f64, sigma: f64| {
        if sigma > 0.0 {
            *value += Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
        }
    };
    for v in [&mut reading.x, &mut reading.y, &mut reading.z] {
        jitter(v, noise.position);
    }
    for v in [&mut reading.roll, &mut reading.pitch, &mut reading.yaw] {
        jitter(v, noise.angle);
    }
    for v in reading.accel.iter_mut() {
        jitter(v, noise.accel);
    }
    for v in [&mut reading.roll_rate, &mut reading.pitch_rate, &mut reading.yaw_rate] {
        jitter(v, noise.rate);
    }
}

/// Everything the system under test receives in one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub tick: u64,
    pub sim_time: f64,
    pub dbw_feedback: DbwFeedback,
    pub encoder_ticks: [i64; 4],
    pub encoder_revs: [f64; 4],
    pub ins: InsReading,
    pub camera_objects: Vec<ProjectedObject>,
    /// Empty on ticks without a LiDAR sweep.
    pub lidar_pcd: Vec<[f64; 3]>,
    /// Ambient conditions as seen by the camera.
    pub env: EnvironmentState,
    pub dtc: f64,
    pub n_col: u32,
    /// Ground-truth longitudinal speed, for logging only.
    pub true_speed: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Vehicle;
    use crate::environment::{Obstacle, Scenario, ScenarioFile, TerrainSpec};
    use crate::geometry::Pose;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn encoder_examples() {
        let mut cfg = VehicleConfig::default();
        cfg.encoder_ppr = 16.0;
        cfg.cumulative_gear_ratio = 1.0;
        assert_eq!(encoder_ticks(0.0, &cfg), 0);
        assert_eq!(encoder_ticks(2.5, &cfg), 40);
        cfg.cumulative_gear_ratio = 4.0;
        assert_eq!(encoder_ticks(1.0, &cfg), 64);
    }

    #[test]
    fn ins_identity_and_yaw() {
        let veh = Vehicle::new(VehicleConfig::default()).unwrap();
        let mut s = VehicleState::at_rest(geometry::planar_pose(0.0, 0.0, 0.0, 0.0), &veh.config);
        let r = ins_read(&s, [0.0; 3], 0.1);
        assert_eq!((r.x, r.y, r.z), (0.0, 0.0, 0.0));
        assert_eq!((r.roll, r.pitch, r.yaw), (0.0, 0.0, 0.0));
        assert_eq!(r.accel, [0.0, 0.0, -GRAVITY]);
        s.pose = geometry::planar_pose(0.0, 0.0, 0.0, FRAC_PI_2);
        let r = ins_read(&s, [0.0; 3], 0.1);
        assert!((r.yaw - FRAC_PI_2).abs() < 1e-12 && r.roll.abs() < 1e-12 && r.pitch.abs() < 1e-12);
    }

    #[test]
    fn ins_forward_acceleration() {
        let cfg = VehicleConfig::default();
        let mut s = VehicleState::at_rest(geometry::planar_pose(0.0, 0.0, 0.0, 0.7), &cfg);
        let dt = 0.1;
        let mut prev = [0.0; 3];
        for k in 1..=100 {
            let v = k as f64 * dt;
            s.linear_velocity = [v * 0.7f64.cos(), v * 0.7f64.sin(), 0.0];
            let r = ins_read(&s, prev, dt);
            assert!((r.accel[0] - 1.0).abs() < 1e-3);
            assert!(r.accel[1].abs() < 1e-3);
            prev = s.linear_velocity;
        }
    }

    #[test]
    fn noise_is_seeded() {
        use rand::SeedableRng;
        let noise = InsNoise { position: 0.1, angle: 0.01, accel: 0.05, rate: 0.01 };
        let draw = |seed| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut r = InsReading::default();
            add_ins_noise(&mut r, &noise, &mut rng);
            r
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    fn scene(obstacles: Vec<Obstacle>) -> Scenario {
        Scenario::from_file(ScenarioFile {
            name: "s".into(),
            road_width: 20.0,
            spawn_arclength: 0.0,
            herd_arclength: None,
            camera_mount: crate::environment::Mount { position: [0.0; 3], roll: 0.0, pitch: 0.0, yaw: 0.0 },
            lidar_mount: crate::environment::Mount { position: [0.0; 3], roll: 0.0, pitch: 0.0, yaw: 0.0 },
            centerline: vec![[-100.0, 0.0, 0.0], [100.0, 0.0, 0.0]],
            terrain: TerrainSpec::Flat { height: 0.0 },
            obstacles,
        })
        .unwrap()
    }

    fn cow(id: u32, x: f64, y: f64) -> Obstacle {
        Obstacle { id, class_label: "cow".into(), footprint_radius: 0.5, height: 2.0, position: [x, y, 0.0] }
    }

    #[test]
    fn lidar_plane_and_cylinder_oracles() {
        let params = LidarParams {
            r_min: 0.1,
            r_max: 100.0,
            theta_min: 0.0,
            theta_max: 0.0,
            theta_res: 1.0,
            phi_min: 30f64.to_radians(),
            phi_max: 30f64.to_radians(),
            phi_res: 1.0,
            mount: crate::environment::Mount { position: [0.0, 0.0, 1.8], roll: 0.0, pitch: 0.0, yaw: 0.0 },
            update_rate: 10.0,
        };
        let empty = scene(vec![]);
        let pts = lidar_scan(&empty, &Pose::identity(), &params);
        assert_eq!(pts.len(), 1);
        let r = (pts[0][0].powi(2) + pts[0][1].powi(2) + (pts[0][2] - 1.8).powi(2)).sqrt();
        assert!((r - 3.6).abs() < 1e-9);

        let sky = LidarParams { phi_min: -0.3, phi_max: -0.3, ..params };
        assert!(lidar_scan(&empty, &Pose::identity(), &sky).is_empty());

        let level = LidarParams { phi_min: 0.0, phi_max: 0.0, ..params };
        let pts = lidar_scan(&scene(vec![cow(1, 10.0, 0.0)]), &Pose::identity(), &level);
        assert_eq!(pts.len(), 1);
        assert!((pts[0][0] - 9.5).abs() < 1e-12);
    }

    #[test]
    fn camera_drops_objects_behind() {
        let sc = scene(vec![cow(1, -10.0, 0.0), cow(2, 10.0, 0.0)]);
        let cam = geometry::planar_pose(0.0, 0.0, 1.0, 0.0);
        let objs = project_objects(&sc, &cam, &CameraIntrinsics::default());
        assert_eq!(objs.len(), 1);
        assert_eq!(objs[0].object_id, 2);
        assert!(!objs[0].occluded);
    }

    #[test]
    fn occlusion_flag() {
        let sc = scene(vec![cow(1, 10.0, 0.0), cow(2, 20.0, 0.0)]);
        let cam = geometry::planar_pose(0.0, 0.0, 1.0, 0.0);
        let objs = project_objects(&sc, &cam, &CameraIntrinsics::default());
        assert_eq!(objs.len(), 2);
        assert!(!objs[0].occluded);
        assert!(objs[1].occluded);
    }
}
