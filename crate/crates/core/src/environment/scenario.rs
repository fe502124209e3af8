use serde::{Deserialize, Serialize};

use super::terrain::{Terrain, TerrainSpec};
use crate::dynamics::VehicleConfig;
use crate::error::{ConfigError, ConfigResult};
use crate::geometry::{self, Pose};

/// Sentinel distance when nothing lies ahead.
pub const DTC_CAP: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub class_label: String,
    pub footprint_radius: f64,
    pub height: f64,
    /// Base center; z is the ground height under the obstacle.
    pub position: [f64; 3],
}

/// Mounting pose of a sensor relative to the vehicle origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mount {
    pub position: [f64; 3],
    #[serde(default)]
    pub roll: f64,
    #[serde(default)]
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl Mount {
    pub fn pose(&self) -> Pose {
        geometry::pose_from_euler(self.position, self.roll, self.pitch, self.yaw)
    }
}

fn default_camera_mount() -> Mount {
    Mount { position: [1.7, 0.0, 1.3], roll: 0.0, pitch: 0.0, yaw: 0.0 }
}

fn default_lidar_mount() -> Mount {
    Mount { position: [0.0, 0.0, 1.9], roll: 0.0, pitch: 0.0, yaw: 0.0 }
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub road_width: f64,
    /// Arclength of the spawn point along the centerline.
    pub spawn_arclength: f64,
    /// Where the herd blocks the road; derived from the obstacles when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herd_arclength: Option<f64>,
    #[serde(default = "default_camera_mount")]
    pub camera_mount: Mount,
    #[serde(default = "default_lidar_mount")]
    pub lidar_mount: Mount,
    pub centerline: Vec<[f64; 3]>,
    pub terrain: TerrainSpec,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSample {
    pub center: [f64; 3],
    pub heading: f64,
    pub grade: f64,
    /// Set when the query arclength was outside the road and got clamped.
    pub clamped: bool,
}

/// Loaded, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub road_width: f64,
    pub centerline: Vec<[f64; 3]>,
    arclength: Vec<f64>,
    pub terrain: Terrain,
    pub obstacles: Vec<Obstacle>,
    pub spawn_pose: Pose,
    pub herd_arclength: f64,
    pub camera_mount: Mount,
    pub lidar_mount: Mount,
    source: ScenarioFile,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> ConfigResult<Self> {
        if file.centerline.len() < 2 {
            return Err(ConfigError::Invalid("centerline needs at least two vertices".into()));
        }
        if !(file.road_width > 0.0) {
            return Err(ConfigError::Invalid("road_width must be positive".into()));
        }
        let mut arclength = vec![0.0];
        for w in file.centerline.windows(2) {
            let d = dist3(w[0], w[1]);
            if !(d > 0.0) {
                return Err(ConfigError::Invalid("centerline arclength must strictly increase".into()));
            }
            arclength.push(arclength.last().unwrap() + d);
        }
        let terrain = Terrain::from_spec(&file.terrain)?;
        let mut ids = std::collections::BTreeSet::new();
        for o in &file.obstacles {
            if !(o.footprint_radius > 0.0 && o.height > 0.0) {
                return Err(ConfigError::Invalid(format!("obstacle {} needs positive size", o.id)));
            }
            if !ids.insert(o.id) {
                return Err(ConfigError::Invalid(format!("duplicate obstacle id {}", o.id)));
            }
        }
        let mut scenario = Self {
            name: file.name.clone(),
            road_width: file.road_width,
            centerline: file.centerline.clone(),
            arclength,
            terrain,
            obstacles: file.obstacles.clone(),
            spawn_pose: Pose::identity(),
            herd_arclength: 0.0,
            camera_mount: file.camera_mount,
            lidar_mount: file.lidar_mount,
            source: file,
        };
        for o in &scenario.obstacles {
            let (_, lateral) = scenario.project(o.position[0], o.position[1]);
            if lateral.abs() > 0.5 * scenario.road_width + 1e-9 {
                return Err(ConfigError::Invalid(format!(
                    "obstacle {} lies {:.2} m off the centerline, outside the road",
                    o.id,
                    lateral.abs()
                )));
            }
        }
        scenario.herd_arclength = match scenario.source.herd_arclength {
            Some(s) => s,
            None => scenario
                .obstacles
                .iter()
                .map(|o| scenario.project(o.position[0], o.position[1]).0)
                .fold(f64::INFINITY, f64::min),
        };
        let spawn = scenario.road_query(scenario.source.spawn_arclength);
        let ground = scenario.terrain.height(spawn.center[0], spawn.center[1]);
        scenario.spawn_pose = geometry::planar_pose(spawn.center[0], spawn.center[1], ground, spawn.heading);
        Ok(scenario)
    }

    pub fn from_toml_str(text: &str) -> ConfigResult<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &std::path::Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.source).expect("scenario serializes")
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.source
    }

    pub fn total_length(&self) -> f64 {
        *self.arclength.last().unwrap()
    }

    /// Point, heading, and grade at arclength `s`, interpolated linearly.
    pub fn road_query(&self, s: f64) -> RoadSample {
        let total = self.total_length();
        let clamped = !(0.0..=total).contains(&s);
        let s = s.clamp(0.0, total);
        let k = match self.arclength.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.centerline.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.centerline.len() - 2),
        };
        let (a, b) = (self.centerline[k], self.centerline[k + 1]);
        let seg = self.arclength[k + 1] - self.arclength[k];
        let f = (s - self.arclength[k]) / seg;
        let center = [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])];
        let horizontal = (b[0] - a[0]).hypot(b[1] - a[1]);
        RoadSample {
            center,
            heading: (b[1] - a[1]).atan2(b[0] - a[0]),
            grade: (b[2] - a[2]).atan2(horizontal),
            clamped,
        }
    }

    /// Nearest-point projection onto the centerline in the horizontal plane:
    /// `(arclength, signed lateral offset)` with left positive.
    pub fn project(&self, x: f64, y: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for (k, w) in self.centerline.windows(2).enumerate() {
            let (ax, ay) = (w[0][0], w[0][1]);
            let (dx, dy) = (w[1][0] - ax, w[1][1] - ay);
            let len2 = dx * dx + dy * dy;
            let t = (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (ax + t * dx, ay + t * dy);
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            if d2 < best.0 {
                let seg = self.arclength[k + 1] - self.arclength[k];
                let cross = dx * (y - ay) - dy * (x - ax);
                let lateral = d2.sqrt().copysign(cross);
                best = (d2, self.arclength[k] + t * seg, lateral);
            }
        }
        (best.1, best.2)
    }

    /// Road-aligned gap from the front bumper to the nearest obstacle ahead.
    pub fn distance_to_collision(&self, pose: &Pose, front_bumper: f64) -> f64 {
        let tip = geometry::transform_point(pose, [front_bumper, 0.0, 0.0]);
        let (s_bumper, _) = self.project(tip[0], tip[1]);
        let mut best = DTC_CAP;
        for o in &self.obstacles {
            let (s_obs, _) = self.project(o.position[0], o.position[1]);
            if s_obs > s_bumper {
                best = best.min((s_obs - s_bumper - o.footprint_radius).max(0.0));
            }
        }
        best
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
}

/// Plan-view vehicle rectangle about the pose origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub front: f64,
    pub rear: f64,
    pub half_width: f64,
}

impl Footprint {
    pub fn from_config(cfg: &VehicleConfig) -> Self {
        Self {
            front: cfg.front_bumper_offset(),
            rear: cfg.rear_bumper_offset(),
            half_width: 0.5 * cfg.body_width,
        }
    }

    /// Clearance between the rectangle and a circle; zero or negative is contact.
    pub fn clearance(&self, pose: &Pose, center: [f64; 3], radius: f64) -> f64 {
        let yaw = geometry::yaw(pose);
        let p = geometry::position(pose);
        let (dx, dy) = (center[0] - p[0], center[1] - p[1]);
        let (c, s) = (yaw.cos(), yaw.sin());
        let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
        let qx = lx.clamp(-self.rear, self.front);
        let qy = ly.clamp(-self.half_width, self.half_width);
        let outside = (lx - qx).hypot(ly - qy);
        if outside > 0.0 {
            outside - radius
        } else {
            // Center inside the rectangle.
            -radius - (self.front - lx).min(lx + self.rear).min(self.half_width - ly.abs())
        }
    }

    pub fn touches(&self, pose: &Pose, scenario: &Scenario) -> bool {
        scenario
            .obstacles
            .iter()
            .any(|o| self.clearance(pose, o.position, o.footprint_radius) <= 0.0)
    }
}

/// Counts contact episodes; touching tangentially counts as contact.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionMonitor {
    pub count: u32,
    pub in_contact: bool,
}

impl CollisionMonitor {
    pub fn update(&mut self, pose: &Pose, footprint: &Footprint, scenario: &Scenario) -> u32 {
        let touching = footprint.touches(pose, scenario);
        if touching && !self.in_contact {
            self.count += 1;
        }
        self.in_contact = touching;
        self.count
    }
}

/// Stateless form: increments `prior_count` when in contact and the previous
/// tick was not.
pub fn collision_check(
    pose: &Pose,
    footprint: &Footprint,
    scenario: &Scenario,
    prior_count: u32,
    was_in_contact: bool,
) -> (u32, bool) {
    let mut m = CollisionMonitor { count: prior_count, in_contact: was_in_contact };
    let c = m.update(pose, footprint, scenario);
    (c, m.in_contact)
}

/// The shipped default: a gently curving dirt road over rolling ground with
/// a herd of animals blocking it about 100 m from the spawn point.
pub fn dirt_road_herd() -> ScenarioFile {
    let amplitude = 0.15;
    let wavelength = 25.0;
    let ground = |x: f64, y: f64| super::terrain::rolling_height(x, y, amplitude, wavelength);
    let round = |v: f64| (v * 1e6).round() / 1e6;
    // 40 m straight, a 60 m left arc of radius 200 m, then straight again.
    let mut xy = Vec::new();
    let (radius, arc_len): (f64, f64) = (200.0, 60.0);
    let mut s = 0.0;
    while s <= 170.0 + 1e-9 {
        let p = if s <= 40.0 {
            (s, 0.0, 0.0)
        } else if s <= 40.0 + arc_len {
            let a = (s - 40.0) / radius;
            (40.0 + radius * a.sin(), radius * (1.0 - a.cos()), a)
        } else {
            let a = arc_len / radius;
            let (x0, y0) = (40.0 + radius * a.sin(), radius * (1.0 - a.cos()));
            let d = s - 40.0 - arc_len;
            (x0 + d * a.cos(), y0 + d * a.sin(), a)
        };
        xy.push(p);
        s += 2.0;
    }
    let centerline: Vec<[f64; 3]> =
        xy.iter().map(|&(x, y, _)| [round(x), round(y), round(ground(x, y))]).collect();
    // Herd placement relative to the road frame at s = 115 m.
    let a = arc_len / radius;
    let base = (40.0 + radius * a.sin(), radius * (1.0 - a.cos()));
    let (tx, ty) = (a.cos(), a.sin());
    let (nx, ny) = (-ty, tx);
    let herd = [
        (1, "cow", 1.2, 1.5, 15.0, -1.6),
        (2, "cow", 1.2, 1.5, 17.5, 1.4),
        (3, "horse", 1.1, 1.7, 16.0, 0.2),
        (4, "sheep", 0.6, 0.9, 14.5, 2.6),
        (5, "cow", 1.2, 1.5, 19.0, -2.4),
        (6, "sheep", 0.6, 0.9, 18.5, 2.8),
    ];
    let obstacles = herd
        .iter()
        .map(|&(id, label, r, h, along, lateral)| {
            let x = base.0 + along * tx + lateral * nx;
            let y = base.1 + along * ty + lateral * ny;
            Obstacle {
                id,
                class_label: label.to_string(),
                footprint_radius: r,
                height: h,
                position: [round(x), round(y), round(ground(x, y))],
            }
        })
        .collect();
    ScenarioFile {
        name: "dirt-road-herd".into(),
        road_width: 7.0,
        spawn_arclength: 10.0,
        herd_arclength: None,
        camera_mount: default_camera_mount(),
        lidar_mount: default_lidar_mount(),
        centerline,
        terrain: TerrainSpec::Rolling {
            origin: [-20.0, -40.0],
            size: [220.0, 120.0],
            spacing: 1.0,
            amplitude,
            wavelength,
        },
        obstacles,
    }
}
