use thiserror::Error;

/// Problems with vehicle, scenario, or suite configuration.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown gear {0}")]
    UnknownGear(i32),
    #[error("unknown weather preset `{0}`")]
    UnknownWeather(String),
    #[error("total sprung mass is zero")]
    ZeroMass,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Errors raised while stepping the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite {field} after step at t={time:.3}s")]
    NonFinite { field: &'static str, time: f64 },
    #[error("time step {0} outside (0, 0.05] s")]
    BadTimeStep(f64),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type ConfigResult<T> = Result<T, ConfigError>;
