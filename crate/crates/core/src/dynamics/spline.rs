//! Two-piece cubic tire friction curve.
//!
//! Segment 0 runs from the origin anchor to the extremum, segment 1 from the
//! extremum to the asymptote. Each segment is a cubic `a·S³ + b·S² + c·S + d`
//! in absolute slip. The anchors fix four values; the remaining conditions are
//! zero slope at the extremum (both sides), a prescribed initial stiffness at
//! the origin and zero slope at the asymptote.

use serde::{Deserialize, Serialize};

use super::config::TireAnchors;
use crate::error::{ConfigError, ConfigResult};

/// Monomial coefficients `(a, b, c, d)`.
pub type Cubic = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionSpline {
    pub origin: (f64, f64),
    pub extremum: (f64, f64),
    pub asymptote: (f64, f64),
    pub segment_coeffs: [Cubic; 2],
}

/// Hermite cubic through `(x0, y0, m0)` and `(x1, y1, m1)`, in monomial form.
fn hermite_monomial(x0: f64, y0: f64, m0: f64, x1: f64, y1: f64, m1: f64) -> Cubic {
    let h = x1 - x0;
    // Local form in u = x - x0.
    let c0 = y0;
    let c1 = m0;
    let c2 = 3.0 * (y1 - y0) / (h * h) - (2.0 * m0 + m1) / h;
    let c3 = 2.0 * (y0 - y1) / (h * h * h) + (m0 + m1) / (h * h);
    [
        c3,
        c2 - 3.0 * c3 * x0,
        c1 - 2.0 * c2 * x0 + 3.0 * c3 * x0 * x0,
        c0 - c1 * x0 + c2 * x0 * x0 - c3 * x0 * x0 * x0,
    ]
}

fn eval(c: &Cubic, s: f64) -> f64 {
    ((c[0] * s + c[1]) * s + c[2]) * s + c[3]
}

fn eval_slope(c: &Cubic, s: f64) -> f64 {
    (3.0 * c[0] * s + 2.0 * c[1]) * s + c[2]
}

impl FrictionSpline {
    pub fn new(
        origin: (f64, f64),
        extremum: (f64, f64),
        asymptote: (f64, f64),
        stiffness_factor: f64,
    ) -> ConfigResult<Self> {
        let (s0, f0) = origin;
        let (se, fe) = extremum;
        let (sa, fa) = asymptote;
        if !(s0 < se && se < sa) {
            return Err(ConfigError::Invalid("friction anchors need S0 < Se < Sa".into()));
        }
        if fe < fa {
            return Err(ConfigError::Invalid("friction anchors need Fe >= Fa".into()));
        }
        let initial_slope = stiffness_factor * fe / se;
        let seg0 = hermite_monomial(s0, f0, initial_slope, se, fe, 0.0);
        let seg1 = hermite_monomial(se, fe, 0.0, sa, fa, 0.0);
        Ok(Self { origin, extremum, asymptote, segment_coeffs: [seg0, seg1] })
    }

    pub fn from_anchors(anchors: &TireAnchors) -> ConfigResult<Self> {
        Self::new(
            (anchors.origin[0], anchors.origin[1]),
            (anchors.extremum[0], anchors.extremum[1]),
            (anchors.asymptote[0], anchors.asymptote[1]),
            anchors.stiffness_factor,
        )
    }

    /// Normalized friction coefficient for a non-negative slip magnitude.
    fn magnitude(&self, s: f64) -> f64 {
        let (s0, f0) = self.origin;
        if s >= self.asymptote.0 {
            self.asymptote.1
        } else if s >= self.extremum.0 {
            eval(&self.segment_coeffs[1], s)
        } else if s >= s0 {
            eval(&self.segment_coeffs[0], s)
        } else {
            // Below the origin anchor the curve ramps linearly from zero.
            f0 * s / s0
        }
    }

    fn magnitude_slope(&self, s: f64) -> f64 {
        let (s0, f0) = self.origin;
        if s >= self.asymptote.0 {
            0.0
        } else if s >= self.extremum.0 {
            eval_slope(&self.segment_coeffs[1], s)
        } else if s >= s0 {
            eval_slope(&self.segment_coeffs[0], s)
        } else {
            f0 / s0
        }
    }

    /// Friction coefficient with the sign of `slip` restored.
    pub fn value(&self, slip: f64) -> f64 {
        self.magnitude(slip.abs()).copysign(slip)
    }

    /// d(value)/d(slip). Even in slip, so no sign restoration.
    pub fn slope(&self, slip: f64) -> f64 {
        self.magnitude_slope(slip.abs())
    }

    /// Direct evaluation of segment `k`, without range selection.
    pub fn segment_value(&self, k: usize, s: f64) -> f64 {
        eval(&self.segment_coeffs[k], s)
    }

    pub fn segment_slope(&self, k: usize, s: f64) -> f64 {
        eval_slope(&self.segment_coeffs[k], s)
    }
}

/// Tire force for the given slip and normal load.
pub fn tire_force(slip: f64, spline: &FrictionSpline, normal_load: f64) -> f64 {
    spline.value(slip) * normal_load.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spline() -> FrictionSpline {
        FrictionSpline::from_anchors(&TireAnchors::default()).unwrap()
    }

    #[test]
    fn origin_anchor_gives_zero_force() {
        assert_eq!(tire_force(0.0, &default_spline(), 4000.0), 0.0);
    }

    #[test]
    fn extremum_returns_peak_times_load() {
        let sp = default_spline();
        let f = tire_force(sp.extremum.0, &sp, 3000.0);
        assert!((f - 0.9 * 3000.0).abs() < 1e-9);
    }

    #[test]
    fn saturates_past_asymptote_and_keeps_sign() {
        let sp = default_spline();
        assert_eq!(tire_force(5.0, &sp, 1000.0), 700.0);
        assert_eq!(tire_force(-5.0, &sp, 1000.0), -700.0);
        assert!((tire_force(-0.05, &sp, 1.0) + tire_force(0.05, &sp, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn smooth_at_extremum() {
        let sp = default_spline();
        let se = sp.extremum.0;
        assert!((sp.segment_value(0, se) - sp.segment_value(1, se)).abs() < 1e-12);
        assert!(sp.segment_slope(0, se).abs() < 1e-9);
        assert!(sp.segment_slope(1, se).abs() < 1e-9);
    }

    #[test]
    fn rejects_unordered_anchors() {
        assert!(FrictionSpline::new((0.0, 0.0), (0.5, 1.0), (0.2, 0.8), 1.5).is_err());
        assert!(FrictionSpline::new((0.0, 0.0), (0.1, 0.5), (0.4, 0.8), 1.5).is_err());
    }
}
