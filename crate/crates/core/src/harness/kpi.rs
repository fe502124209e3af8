use serde::{Deserialize, Serialize};

use crate::environment::Weather;

/// Speed below which the vehicle counts as stopped, m/s.
pub const STOP_SPEED: f64 = 0.05;
/// Moving-average window applied to acceleration before differencing.
pub const SMOOTHING_WINDOW: usize = 5;

/// One logged control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Ground-truth longitudinal speed.
    pub speed: f64,
    pub v_ref: f64,
    pub v_est: f64,
    pub aeb: f64,
    pub n_det: u64,
    pub n_filtered: usize,
    pub throttle: f64,
    pub brake: f64,
    pub steering: f64,
    pub headlights: bool,
    pub drl: bool,
    pub dtc: f64,
    pub n_col: u32,
    pub illumination: f64,
    pub weather: Weather,
    pub visible_objects: usize,
    pub lidar_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sut_fault: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiSummary {
    pub n_det_total: u64,
    pub n_col_total: u32,
    pub peak_velocity: f64,
    pub peak_accel: f64,
    /// Magnitude of the strongest deceleration.
    pub peak_decel: f64,
    /// Magnitude.
    pub peak_jerk: f64,
    /// Mean of `v_ref − v_est`.
    pub mean_velocity_error: f64,
    pub final_dtc: f64,
    pub stop_achieved: bool,
    pub duration: f64,
}

/// Trailing moving average; the first samples average what is available.
pub fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..x.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            x[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Finite difference `(x[k] − x[k−1]) / (t[k] − t[k−1])`; the first entry is 0.
pub fn differentiate(x: &[f64], t: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|k| if k == 0 { 0.0 } else { (x[k] - x[k - 1]) / (t[k] - t[k - 1]) })
        .collect()
}

/// Smoothed acceleration and jerk profiles of a speed log.
pub fn motion_profile(speed: &[f64], time: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let accel = moving_average(&differentiate(speed, time), SMOOTHING_WINDOW);
    let jerk = differentiate(&accel, time);
    (accel, jerk)
}

pub fn compute_kpis(log: &[TickRecord]) -> KpiSummary {
    let Some(last) = log.last() else {
        return KpiSummary::default();
    };
    let speed: Vec<f64> = log.iter().map(|r| r.speed).collect();
    let time: Vec<f64> = log.iter().map(|r| r.time).collect();
    let (accel, jerk) = motion_profile(&speed, &time);
    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, f64::max);
    KpiSummary {
        n_det_total: last.n_det,
        n_col_total: last.n_col,
        peak_velocity: max(&mut speed.iter().copied()),
        peak_accel: max(&mut accel.iter().copied()),
        peak_decel: max(&mut accel.iter().map(|a| -a)),
        peak_jerk: max(&mut jerk.iter().map(|j| j.abs())),
        mean_velocity_error: log.iter().map(|r| r.v_ref - r.v_est).sum::<f64>() / log.len() as f64,
        final_dtc: last.dtc,
        stop_achieved: last.speed.abs() < STOP_SPEED && last.aeb > 0.0 && last.n_col == 0,
        duration: last.time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(tick: u64, time: f64, speed: f64) -> TickRecord {
        TickRecord {
            tick,
            time,
            x: 0.0,
            y: 0.0,
            yaw: 0.0,
            speed,
            v_ref: 3.0,
            v_est: 3.0,
            aeb: 0.0,
            n_det: 0,
            n_filtered: 0,
            throttle: 0.0,
            brake: 0.0,
            steering: 0.0,
            headlights: false,
            drl: true,
            dtc: 50.0,
            n_col: 0,
            illumination: 1.0,
            weather: Weather::Clear,
            visible_objects: 0,
            lidar_points: 0,
            sut_fault: None,
        }
    }

    #[test]
    fn constant_velocity() {
        let log: Vec<_> = (0..100).map(|k| record(k, k as f64 * 0.1, 3.0)).collect();
        let k = compute_kpis(&log);
        assert_eq!(k.peak_jerk, 0.0);
        assert_eq!(k.mean_velocity_error, 0.0);
        assert_eq!(k.peak_velocity, 3.0);
        assert!((k.duration - 9.9).abs() < 1e-12);
    }

    /// S-curve speed: jerk ±J for T, hold accel A = J·T, then mirror down.
    fn s_curve(j: f64, t_j: f64, t_hold: f64, dt: f64) -> Vec<(f64, f64)> {
        let mut out = vec![];
        let (mut v, mut a) = (0.0, 0.0);
        let phases = [(j, t_j), (0.0, t_hold), (-j, t_j), (0.0, 2.0), (-j, t_j), (0.0, t_hold), (j, t_j), (0.0, 2.0)];
        let mut t = 0.0;
        out.push((t, v));
        for (jerk, dur) in phases {
            let n = (dur / dt).round() as usize;
            for _ in 0..n {
                v += a * dt + 0.5 * jerk * dt * dt;
                a += jerk * dt;
                t += dt;
                out.push((t, v));
            }
        }
        out
    }

    #[test]
    fn s_curve_peaks_match_closed_form() {
        let (j, t_j) = (2.0, 1.0);
        let prof = s_curve(j, t_j, 2.0, 0.1);
        let log: Vec<_> = prof.iter().enumerate().map(|(k, &(t, v))| record(k as u64, t, v)).collect();
        let k = compute_kpis(&log);
        let a = j * t_j;
        // v_max = A·T_j + A·T_hold
        let v_max = a * t_j + a * 2.0;
        assert!((k.peak_velocity - v_max).abs() / v_max < 0.05, "{}", k.peak_velocity);
        assert!((k.peak_accel - a).abs() / a < 0.05, "{}", k.peak_accel);
        assert!((k.peak_decel - a).abs() / a < 0.05, "{}", k.peak_decel);
        assert!((k.peak_jerk - j).abs() / j < 0.05, "{}", k.peak_jerk);
    }

    #[test]
    fn collision_episode_count() {
        let mut log: Vec<_> = (0..10).map(|k| record(k, k as f64 * 0.1, 1.0)).collect();
        for r in &mut log[6..] {
            r.n_col = 1;
        }
        assert_eq!(compute_kpis(&log).n_col_total, 1);
    }

    #[test]
    fn signed_mean_error() {
        let mut log: Vec<_> = (0..4).map(|k| record(k, k as f64 * 0.1, 1.0)).collect();
        log[0].v_est = 3.5;
        log[1].v_est = 3.5;
        assert!((compute_kpis(&log).mean_velocity_error + 0.25).abs() < 1e-12);
    }

    #[test]
    fn moving_average_warmup() {
        assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0, 9.0, 11.0], 5), vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
    }
}
