use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::{generate_matrix, Axes, TestCase};
use super::requirements::{default_requirements, validate_requirements, Requirement};
use crate::autonomy::SutCalibration;
use crate::dynamics::{VehicleConfig, MAX_DT};
use crate::environment::{dirt_road_herd, Scenario};
use crate::error::{ConfigError, ConfigResult};
use crate::sensors::{CameraIntrinsics, InsNoise, LidarParams};

pub const BUILTIN_SCENARIO: &str = "builtin:dirt-road-herd";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Termination {
    /// Hard cap on simulated time, s.
    pub max_duration: f64,
    /// A run succeeds once stopped with the AEB engaged for this long, s.
    pub stop_hold: f64,
    pub stop_speed: f64,
    pub end_on_collision: bool,
}

impl Default for Termination {
    fn default() -> Self {
        Self { max_duration: 90.0, stop_hold: 3.0, stop_speed: super::kpi::STOP_SPEED, end_on_collision: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Physics step, s.
    pub dt: f64,
    /// Sensor frame and SUT period, s; a whole multiple of `dt`.
    pub control_period: f64,
    pub camera: CameraIntrinsics,
    pub lidar: LidarParams,
    pub ins_noise: InsNoise,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleConfig>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: 0.02,
            control_period: 0.1,
            camera: CameraIntrinsics::default(),
            lidar: LidarParams::default(),
            ins_noise: InsNoise::default(),
            vehicle: None,
        }
    }
}

impl SimulationSettings {
    pub fn substeps(&self) -> ConfigResult<usize> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(ConfigError::Invalid(format!("dt {} outside (0, {MAX_DT}]", self.dt)));
        }
        let n = (self.control_period / self.dt).round();
        if n < 1.0 || (n * self.dt - self.control_period).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "control period {} is not a whole multiple of dt {}",
                self.control_period, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn vehicle_config(&self) -> VehicleConfig {
        self.vehicle.clone().unwrap_or_default()
    }
}

/// Everything needed to generate and run a test matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Suite {
    pub name: String,
    /// Scenario file relative to the suite file, or `builtin:dirt-road-herd`.
    pub scenario: String,
    pub base_seed: u64,
    pub axes: Axes,
    pub termination: Termination,
    pub simulation: SimulationSettings,
    pub calibration: SutCalibration,
    pub requirements: Vec<Requirement>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for Suite {
    fn default() -> Self {
        Self {
            name: "dirt-road-herd".into(),
            scenario: BUILTIN_SCENARIO.into(),
            base_seed: 2024,
            axes: Axes::default(),
            termination: Termination::default(),
            simulation: SimulationSettings::default(),
            calibration: SutCalibration::default(),
            requirements: default_requirements(),
            base_dir: None,
        }
    }
}

impl Suite {
    pub fn from_toml_str(text: &str) -> ConfigResult<Self> {
        let suite: Suite = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let mut suite = Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        suite.base_dir = path.parent().map(Path::to_path_buf);
        Ok(suite)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("suite serializes")
    }

    pub fn validate(&self) -> ConfigResult<()> {
        self.axes.validate()?;
        validate_requirements(&self.requirements)?;
        self.simulation.substeps()?;
        self.simulation.lidar.validate()?;
        crate::sensors::projection_matrix(&self.simulation.camera).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let t = &self.termination;
        if !(t.max_duration > 0.0 && t.stop_hold >= 0.0 && t.stop_speed > 0.0) {
            return Err(ConfigError::Invalid("termination settings must be positive".into()));
        }
        Ok(())
    }

    pub fn load_scenario(&self) -> ConfigResult<Scenario> {
        if self.scenario == BUILTIN_SCENARIO {
            return Scenario::from_file(dirt_road_herd());
        }
        let path = match &self.base_dir {
            Some(dir) => dir.join(&self.scenario),
            None => PathBuf::from(&self.scenario),
        };
        Scenario::load(&path)
    }

    pub fn cases(&self) -> ConfigResult<Vec<TestCase>> {
        generate_matrix(&self.axes, self.base_seed, self.termination.max_duration, &self.scenario)
    }

    pub fn verification_ids(&self) -> Vec<String> {
        self.requirements.iter().map(|r| r.verified_by.clone()).collect()
    }
}
