//! Rigid transforms. World frame is x east, y north, z up; body frame is
//! x forward, y left, z up.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

pub type Pose = Isometry3<f64>;

pub fn pose_from_euler(position: [f64; 3], roll: f64, pitch: f64, yaw: f64) -> Pose {
    Isometry3::from_parts(
        Translation3::new(position[0], position[1], position[2]),
        UnitQuaternion::from_euler_angles(roll, pitch, yaw),
    )
}

pub fn planar_pose(x: f64, y: f64, z: f64, yaw: f64) -> Pose {
    pose_from_euler([x, y, z], 0.0, 0.0, yaw)
}

/// Roll, pitch, yaw in the Z-Y-X convention.
pub fn euler_zyx(pose: &Pose) -> (f64, f64, f64) {
    pose.rotation.euler_angles()
}

pub fn yaw(pose: &Pose) -> f64 {
    euler_zyx(pose).2
}

pub fn position(pose: &Pose) -> [f64; 3] {
    let t = pose.translation.vector;
    [t.x, t.y, t.z]
}

pub fn transform_point(pose: &Pose, p: [f64; 3]) -> [f64; 3] {
    let q = pose.transform_point(&Point3::new(p[0], p[1], p[2]));
    [q.x, q.y, q.z]
}

pub fn transform_vector(pose: &Pose, v: [f64; 3]) -> [f64; 3] {
    let q = pose.transform_vector(&Vector3::new(v[0], v[1], v[2]));
    [q.x, q.y, q.z]
}

pub fn inverse_transform_point(pose: &Pose, p: [f64; 3]) -> [f64; 3] {
    let q = pose.inverse_transform_point(&Point3::new(p[0], p[1], p[2]));
    [q.x, q.y, q.z]
}

pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn euler_round_trip_and_axis_isolation() {
        let p = pose_from_euler([1.0, 2.0, 3.0], 0.1, -0.2, 1.3);
        let (r, pi, y) = euler_zyx(&p);
        assert!((r - 0.1).abs() < 1e-12 && (pi + 0.2).abs() < 1e-12 && (y - 1.3).abs() < 1e-12);
        let yawed = planar_pose(0.0, 0.0, 0.0, FRAC_PI_2);
        let (r, pi, y) = euler_zyx(&yawed);
        assert!(r.abs() < 1e-12 && pi.abs() < 1e-12 && (y - FRAC_PI_2).abs() < 1e-12);
        let fwd = transform_vector(&yawed, [1.0, 0.0, 0.0]);
        assert!(fwd[0].abs() < 1e-12 && (fwd[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
