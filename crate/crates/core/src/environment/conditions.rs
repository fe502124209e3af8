use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Illumination never drops below this moonlight floor.
pub const MOONLIGHT_FLOOR: f64 = 0.05;
/// Hour of maximum sun elevation.
pub const SOLAR_NOON: f64 = 13.0;
const DAY_LENGTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Clear,
    Fog,
    Rain,
    Snow,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Clear, Weather::Fog, Weather::Rain, Weather::Snow];

    pub fn visibility(self) -> f64 {
        match self {
            Weather::Clear => 1.0,
            Weather::Fog => 0.35,
            Weather::Rain => 0.6,
            Weather::Snow => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Fog => "fog",
            Weather::Rain => "rain",
            Weather::Snow => "snow",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clear" | "sunny" => Ok(Weather::Clear),
            "fog" | "foggy" => Ok(Weather::Fog),
            "rain" | "rainy" => Ok(Weather::Rain),
            "snow" | "snowy" => Ok(Weather::Snow),
            _ => Err(ConfigError::UnknownWeather(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    pub time_of_day: f64,
    pub weather: Weather,
    pub illumination: f64,
    pub visibility: f64,
}

/// Scalar daylight level in `[0.05, 1]`: a half-sine of sun elevation
/// between 07:00 and 19:00 on top of the moonlight floor.
pub fn illumination(time_of_day: f64) -> f64 {
    let t = time_of_day.rem_euclid(24.0);
    let phase = (t - (SOLAR_NOON - 0.5 * DAY_LENGTH)) / DAY_LENGTH;
    let elevation = if (0.0..=1.0).contains(&phase) {
        (std::f64::consts::PI * phase).sin().max(0.0)
    } else {
        0.0
    };
    MOONLIGHT_FLOOR + (1.0 - MOONLIGHT_FLOOR) * elevation
}

pub fn set_conditions(time_of_day: f64, weather: Weather) -> Result<EnvironmentState, ConfigError> {
    if !(0.0..24.0).contains(&time_of_day) {
        return Err(ConfigError::Invalid(format!("time of day {time_of_day} outside [0, 24)")));
    }
    Ok(EnvironmentState {
        time_of_day,
        weather,
        illumination: illumination(time_of_day),
        visibility: weather.visibility(),
    })
}

/// String form for configuration surfaces; unknown names are errors.
pub fn set_conditions_named(time_of_day: f64, weather: &str) -> Result<EnvironmentState, ConfigError> {
    set_conditions(time_of_day, weather.parse()?)
}
