use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{Mount, Obstacle, Scenario};
use crate::error::ConfigError;
use crate::geometry::{self, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarParams {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_res: f64,
    /// Positive channel angles point below the horizon.
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_res: f64,
    pub mount: Mount,
    pub update_rate: f64,
}

impl Default for LidarParams {
    /// Sparse 16-channel scan; dense enough for logging, cheap enough for a 128-case sweep.
    fn default() -> Self {
        use std::f64::consts::PI;
        let deg = PI / 180.0;
        Self {
            r_min: 0.5,
            r_max: 60.0,
            theta_min: -PI,
            theta_max: PI - 4.0 * deg,
            theta_res: 4.0 * deg,
            phi_min: -15.0 * deg,
            phi_max: 15.0 * deg,
            phi_res: 2.0 * deg,
            mount: Mount { position: [0.0, 0.0, 1.9], roll: 0.0, pitch: 0.0, yaw: 0.0 },
            update_rate: 2.0,
        }
    }
}

impl LidarParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.theta_min < self.theta_max
            && self.phi_min < self.phi_max
            && self.theta_res > 0.0
            && self.phi_res > 0.0
            && 0.0 <= self.r_min
            && self.r_min < self.r_max
            && self.update_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid("lidar parameters violate ordering or positivity".into()))
        }
    }

    /// Sampled angles `[min : res : max]`, inclusive of `max` when it lands on the grid.
    pub fn theta_samples(&self) -> Vec<f64> {
        samples(self.theta_min, self.theta_max, self.theta_res)
    }

    pub fn phi_samples(&self) -> Vec<f64> {
        samples(self.phi_min, self.phi_max, self.phi_res)
    }

    pub fn max_points(&self) -> usize {
        self.theta_samples().len() * self.phi_samples().len()
    }
}

fn samples(min: f64, max: f64, res: f64) -> Vec<f64> {
    let n = ((max - min) / res + 1e-9).floor() as usize + 1;
    (0..n).map(|k| min + k as f64 * res).collect()
}

/// Unit ray direction in the sensor frame.
pub fn ray_direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.cos() * phi.cos(), theta.sin() * phi.cos(), -phi.sin()]
}

/// Nearest hit distance of a unit ray against a capped vertical cylinder.
pub fn ray_cylinder(origin: [f64; 3], dir: [f64; 3], o: &Obstacle, t_min: f64, t_max: f64) -> Option<f64> {
    let (cx, cy, base) = (o.position[0], o.position[1], o.position[2]);
    let top = base + o.height;
    let r = o.footprint_radius;
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t >= t_min && t <= t_max && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };
    let (ox, oy) = (origin[0] - cx, origin[1] - cy);
    let a = dir[0] * dir[0] + dir[1] * dir[1];
    if a > 1e-15 {
        let b = ox * dir[0] + oy * dir[1];
        let c = ox * ox + oy * oy - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a, (-b + sq) / a] {
                let z = origin[2] + t * dir[2];
                if z >= base && z <= top {
                    consider(t);
                }
            }
        }
    }
    if dir[2].abs() > 1e-15 {
        for plane in [base, top] {
            let t = (plane - origin[2]) / dir[2];
            let (x, y) = (ox + t * dir[0], oy + t * dir[1]);
            if x * x + y * y <= r * r {
                consider(t);
            }
        }
    }
    best
}

/// Ray-cast point cloud in the world frame, ordered by channel then azimuth.
pub fn lidar_scan(scene: &Scenario, vehicle_pose: &Pose, params: &LidarParams) -> Vec<[f64; 3]> {
    let sensor = vehicle_pose * params.mount.pose();
    let origin = geometry::position(&sensor);
    let thetas = params.theta_samples();
    params
        .phi_samples()
        .par_iter()
        .map(|&phi| {
            let mut row = Vec::new();
            for &theta in &thetas {
                let dir = geometry::transform_vector(&sensor, ray_direction(theta, phi));
                let mut t_hit = scene.terrain.intersect_ray(origin, dir, params.r_min, params.r_max);
                for o in &scene.obstacles {
                    let limit = t_hit.unwrap_or(params.r_max);
                    if let Some(t) = ray_cylinder(origin, dir, o, params.r_min, limit) {
                        t_hit = Some(t);
                    }
                }
                if let Some(t) = t_hit {
                    row.push([origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]]);
                }
            }
            row
        })
        .collect::<Vec<_>>()
        .concat()
}
