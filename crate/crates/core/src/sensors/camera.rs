use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::environment::{Obstacle, Scenario};
use crate::error::SimError;
use crate::geometry::{self, Pose};

/// Frustum offsets on the near plane plus the native image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub near: f64,
    pub far: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for CameraIntrinsics {
    /// 90° horizontal field of view at 1280×720.
    fn default() -> Self {
        Self {
            near: 0.3,
            far: 300.0,
            left: -0.3,
            right: 0.3,
            top: 0.16875,
            bottom: -0.16875,
            image_width: 1280,
            image_height: 720,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedObject {
    pub object_id: u32,
    pub class_label: String,
    /// Enclosing rectangle area at native resolution, px².
    pub bbox_area: f64,
    pub center: [f64; 2],
    pub range: f64,
    pub occluded: bool,
}

pub fn projection_matrix(intr: &CameraIntrinsics) -> Result<Matrix4<f64>, SimError> {
    let CameraIntrinsics { near: n, far: f, left: l, right: r, top: t, bottom: b, .. } = *intr;
    let finite = [n, f, l, r, t, b].iter().all(|x| x.is_finite());
    if !finite || !(n > 0.0 && n < f && l < r && b < t) {
        return Err(SimError::Domain(format!(
            "degenerate frustum N={n} F={f} L={l} R={r} T={t} B={b}"
        )));
    }
    Ok(Matrix4::new(
        2.0 * n / (r - l), 0.0, (r + l) / (r - l), 0.0,
        0.0, 2.0 * n / (t - b), (t + b) / (t - b), 0.0,
        0.0, 0.0, -(f + n) / (f - n), -2.0 * f * n / (f - n),
        0.0, 0.0, -1.0, 0.0,
    ))
}

/// World point to camera coordinates (x right, y up, looking down −z).
///
/// `camera_pose` uses the vehicle body convention (x forward, z up).
pub fn view_transform(camera_pose: &Pose, world: [f64; 3]) -> [f64; 3] {
    let b = geometry::inverse_transform_point(camera_pose, world);
    [-b[1], b[2], -b[0]]
}

/// Camera-frame point to pixel coordinates and depth; `None` behind the near plane.
pub fn to_pixel(p: &Matrix4<f64>, intr: &CameraIntrinsics, cam: [f64; 3]) -> Option<([f64; 2], f64)> {
    let depth = -cam[2];
    if depth < intr.near {
        return None;
    }
    let clip = p * Vector4::new(cam[0], cam[1], cam[2], 1.0);
    let (nx, ny) = (clip.x / clip.w, clip.y / clip.w);
    let u = 0.5 * (nx + 1.0) * intr.image_width as f64;
    let v = 0.5 * (1.0 - ny) * intr.image_height as f64;
    Some(([u, v], depth))
}

fn box_corners(o: &Obstacle) -> [[f64; 3]; 8] {
    let [x, y, z] = o.position;
    let r = o.footprint_radius;
    std::array::from_fn(|k| {
        [
            x + if k & 1 == 0 { -r } else { r },
            y + if k & 2 == 0 { -r } else { r },
            z + if k & 4 == 0 { 0.0 } else { o.height },
        ]
    })
}

/// Whether the segment from `from` to `to` passes through a vertical cylinder.
pub(crate) fn segment_hits_cylinder(from: [f64; 3], to: [f64; 3], o: &Obstacle) -> bool {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len == 0.0 {
        return false;
    }
    let dir = [d[0] / len, d[1] / len, d[2] / len];
    super::lidar::ray_cylinder(from, dir, o, 0.0, len).is_some()
}

/// Geometric stand-in for a rendered camera frame.
///
/// Objects outside the frustum are dropped. Objects whose center is hidden
/// behind another obstacle are kept with `occluded` set.
pub fn project_objects(scene: &Scenario, camera_pose: &Pose, intr: &CameraIntrinsics) -> Vec<ProjectedObject> {
    let Ok(p) = projection_matrix(intr) else {
        return Vec::new();
    };
    let (w, h) = (intr.image_width as f64, intr.image_height as f64);
    let eye = geometry::position(camera_pose);
    let mut out = Vec::new();
    for o in &scene.obstacles {
        let mid = [o.position[0], o.position[1], o.position[2] + 0.5 * o.height];
        let cam_mid = view_transform(camera_pose, mid);
        let depth = -cam_mid[2];
        if depth < intr.near || depth > intr.far {
            continue;
        }
        let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in box_corners(o) {
            let mut cam = view_transform(camera_pose, c);
            // Pull corners behind the near plane onto it.
            if -cam[2] < intr.near {
                cam[2] = -intr.near;
            }
            let (px, _) = to_pixel(&p, intr, cam).expect("corner clamped to the near plane");
            u0 = u0.min(px[0]);
            v0 = v0.min(px[1]);
            u1 = u1.max(px[0]);
            v1 = v1.max(px[1]);
        }
        let (u0, u1) = (u0.max(0.0), u1.min(w));
        let (v0, v1) = (v0.max(0.0), v1.min(h));
        if u1 <= u0 || v1 <= v0 {
            continue;
        }
        let occluded = scene
            .obstacles
            .iter()
            .any(|other| other.id != o.id && segment_hits_cylinder(eye, mid, other));
        let range = ((mid[0] - eye[0]).powi(2) + (mid[1] - eye[1]).powi(2) + (mid[2] - eye[2]).powi(2)).sqrt();
        out.push(ProjectedObject {
            object_id: o.id,
            class_label: o.class_label.clone(),
            bbox_area: (u1 - u0) * (v1 - v0),
            center: [0.5 * (u0 + u1), 0.5 * (v0 + v1)],
            range,
            occluded,
        });
    }
    out
}
