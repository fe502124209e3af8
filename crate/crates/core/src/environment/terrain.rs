use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ConfigResult};

/// How a scenario describes its ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainSpec {
    Flat {
        height: f64,
    },
    /// Procedural rolling dirt-road profile sampled onto a grid.
    Rolling {
        origin: [f64; 2],
        size: [f64; 2],
        spacing: f64,
        amplitude: f64,
        wavelength: f64,
    },
    Grid {
        origin: [f64; 2],
        spacing: f64,
        nx: usize,
        ny: usize,
        heights: Vec<f64>,
    },
}

/// Heightfield with bilinear interpolation, clamped at the grid border.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    origin: [f64; 2],
    spacing: f64,
    nx: usize,
    ny: usize,
    heights: Vec<f64>,
    flat: Option<f64>,
    max_height: f64,
}

pub fn rolling_height(x: f64, y: f64, amplitude: f64, wavelength: f64) -> f64 {
    use std::f64::consts::TAU;
    amplitude * (TAU * x / wavelength).sin() + 0.5 * amplitude * (TAU * y / (0.7 * wavelength)).cos()
}

impl Terrain {
    pub fn flat(height: f64) -> Self {
        Self {
            origin: [0.0; 2],
            spacing: 1.0,
            nx: 0,
            ny: 0,
            heights: Vec::new(),
            flat: Some(height),
            max_height: height,
        }
    }

    pub fn from_spec(spec: &TerrainSpec) -> ConfigResult<Self> {
        match spec {
            TerrainSpec::Flat { height } => Ok(Self::flat(*height)),
            TerrainSpec::Rolling { origin, size, spacing, amplitude, wavelength } => {
                if !(*spacing > 0.0 && size[0] > 0.0 && size[1] > 0.0 && *wavelength > 0.0) {
                    return Err(ConfigError::Invalid("rolling terrain needs positive size, spacing, wavelength".into()));
                }
                let nx = (size[0] / spacing).round() as usize + 1;
                let ny = (size[1] / spacing).round() as usize + 1;
                let mut heights = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        let x = origin[0] + i as f64 * spacing;
                        let y = origin[1] + j as f64 * spacing;
                        heights.push(rolling_height(x, y, *amplitude, *wavelength));
                    }
                }
                Self::grid(*origin, *spacing, nx, ny, heights)
            }
            TerrainSpec::Grid { origin, spacing, nx, ny, heights } => {
                Self::grid(*origin, *spacing, *nx, *ny, heights.clone())
            }
        }
    }

    pub fn grid(origin: [f64; 2], spacing: f64, nx: usize, ny: usize, heights: Vec<f64>) -> ConfigResult<Self> {
        if nx < 2 || ny < 2 || heights.len() != nx * ny || spacing <= 0.0 {
            return Err(ConfigError::Invalid("heightfield grid needs nx,ny >= 2 and nx*ny heights".into()));
        }
        let max_height = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { origin, spacing, nx, ny, heights, flat: None, max_height })
    }

    pub fn is_flat(&self) -> bool {
        self.flat.is_some()
    }

    pub fn max_height(&self) -> f64 {
        self.max_height
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        if let Some(h) = self.flat {
            return h;
        }
        let gx = ((x - self.origin[0]) / self.spacing).clamp(0.0, (self.nx - 1) as f64);
        let gy = ((y - self.origin[1]) / self.spacing).clamp(0.0, (self.ny - 1) as f64);
        let i = (gx.floor() as usize).min(self.nx - 2);
        let j = (gy.floor() as usize).min(self.ny - 2);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let at = |i: usize, j: usize| self.heights[j * self.nx + i];
        let h0 = at(i, j) * (1.0 - fx) + at(i + 1, j) * fx;
        let h1 = at(i, j + 1) * (1.0 - fx) + at(i + 1, j + 1) * fx;
        h0 * (1.0 - fy) + h1 * fy
    }

    /// Distance along a unit ray to the ground, within `[t_min, t_max]`.
    pub fn intersect_ray(&self, origin: [f64; 3], dir: [f64; 3], t_min: f64, t_max: f64) -> Option<f64> {
        let point = |t: f64| [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
        if let Some(h) = self.flat {
            if dir[2] >= 0.0 {
                return None;
            }
            let t = (h - origin[2]) / dir[2];
            return (t >= t_min && t <= t_max).then_some(t);
        }
        let gap = |t: f64| {
            let p = point(t);
            p[2] - self.height(p[0], p[1])
        };
        // Rays climbing above the highest sample never come back down.
        if dir[2] >= 0.0 && origin[2] > self.max_height {
            return None;
        }
        let step = 0.5 * self.spacing;
        let mut t0 = t_min;
        if gap(t0) <= 0.0 {
            return Some(t_min);
        }
        while t0 < t_max {
            let t1 = (t0 + step).min(t_max);
            let g1 = gap(t1);
            if g1 <= 0.0 {
                let (mut lo, mut hi) = (t0, t1);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-10 {
                        break;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            if dir[2] >= 0.0 && point(t1)[2] > self.max_height {
                return None;
            }
            t0 = t1;
        }
        None
    }
}
