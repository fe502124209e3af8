//! Variant × parameter test matrix.
//!
//! Case ids are 1-based mixed-radix numbers. Digit order, fastest first:
//! planning (C2), control (C3), perception (C1), weather (P2), time of day
//! (P1). With the standard axes this puts {C1.2, C2.1, C3.2, P1.1, P2.2} at
//! case 15. `orderings_reproducing_anchor` in the tests finds the two digit
//! orders that do; the other swaps perception and control.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::autonomy::{Control, Perception, Planning, VariantConfig};
use crate::environment::Weather;
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TodPreset {
    #[serde(rename = "P1.1")]
    P1_1,
    #[serde(rename = "P1.2")]
    P1_2,
    #[serde(rename = "P1.3")]
    P1_3,
    #[serde(rename = "P1.4")]
    P1_4,
}

impl TodPreset {
    pub const ALL: [TodPreset; 4] = [TodPreset::P1_1, TodPreset::P1_2, TodPreset::P1_3, TodPreset::P1_4];

    /// Hour of day.
    pub fn hour(self) -> f64 {
        match self {
            TodPreset::P1_1 => 10.0,
            TodPreset::P1_2 => 13.0,
            TodPreset::P1_3 => 16.0,
            TodPreset::P1_4 => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TodPreset::P1_1 => "P1.1",
            TodPreset::P1_2 => "P1.2",
            TodPreset::P1_3 => "P1.3",
            TodPreset::P1_4 => "P1.4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeatherPreset {
    #[serde(rename = "P2.1")]
    P2_1,
    #[serde(rename = "P2.2")]
    P2_2,
    #[serde(rename = "P2.3")]
    P2_3,
    #[serde(rename = "P2.4")]
    P2_4,
}

impl WeatherPreset {
    pub const ALL: [WeatherPreset; 4] = [WeatherPreset::P2_1, WeatherPreset::P2_2, WeatherPreset::P2_3, WeatherPreset::P2_4];

    pub fn weather(self) -> Weather {
        match self {
            WeatherPreset::P2_1 => Weather::Clear,
            WeatherPreset::P2_2 => Weather::Fog,
            WeatherPreset::P2_3 => Weather::Rain,
            WeatherPreset::P2_4 => Weather::Snow,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WeatherPreset::P2_1 => "P2.1",
            WeatherPreset::P2_2 => "P2.2",
            WeatherPreset::P2_3 => "P2.3",
            WeatherPreset::P2_4 => "P2.4",
        }
    }
}

/// Values swept along each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Axes {
    pub perception: Vec<Perception>,
    pub planning: Vec<Planning>,
    pub control: Vec<Control>,
    pub time_of_day: Vec<TodPreset>,
    pub weather: Vec<WeatherPreset>,
}

impl Default for Axes {
    fn default() -> Self {
        Self {
            perception: Perception::ALL.to_vec(),
            planning: Planning::ALL.to_vec(),
            control: Control::ALL.to_vec(),
            time_of_day: TodPreset::ALL.to_vec(),
            weather: WeatherPreset::ALL.to_vec(),
        }
    }
}

fn check_axis<T: PartialEq>(name: &str, values: &[T]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::Invalid(format!("axis {name} is empty")));
    }
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(ConfigError::Invalid(format!("axis {name} repeats a value")));
        }
    }
    Ok(())
}

impl Axes {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_axis("C1", &self.perception)?;
        check_axis("C2", &self.planning)?;
        check_axis("C3", &self.control)?;
        check_axis("P1", &self.time_of_day)?;
        check_axis("P2", &self.weather)
    }

    pub fn len(&self) -> usize {
        self.perception.len() * self.planning.len() * self.control.len() * self.time_of_day.len() * self.weather.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis sizes in digit order, fastest first.
    fn radices(&self) -> [usize; 5] {
        [self.planning.len(), self.control.len(), self.perception.len(), self.weather.len(), self.time_of_day.len()]
    }

    /// The tuple at a 1-based case id.
    pub fn decode(&self, case_id: u32) -> Option<CaseTuple> {
        if case_id == 0 || case_id as usize > self.len() {
            return None;
        }
        let mut rest = case_id as usize - 1;
        let mut d = [0usize; 5];
        for (digit, radix) in d.iter_mut().zip(self.radices()) {
            *digit = rest % radix;
            rest /= radix;
        }
        Some(CaseTuple {
            variant: VariantConfig {
                planning: self.planning[d[0]],
                control: self.control[d[1]],
                perception: self.perception[d[2]],
            },
            time_of_day: self.time_of_day[d[4]],
            weather: self.weather[d[3]],
        })
    }

    /// The 1-based case id of a tuple, if all its values are on the axes.
    pub fn encode(&self, t: &CaseTuple) -> Option<u32> {
        let d = [
            self.planning.iter().position(|v| *v == t.variant.planning)?,
            self.control.iter().position(|v| *v == t.variant.control)?,
            self.perception.iter().position(|v| *v == t.variant.perception)?,
            self.weather.iter().position(|v| *v == t.weather)?,
            self.time_of_day.iter().position(|v| *v == t.time_of_day)?,
        ];
        let mut id = 0;
        for (digit, radix) in d.iter().zip(self.radices()).rev() {
            id = id * radix + digit;
        }
        Some(id as u32 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaseTuple {
    pub variant: VariantConfig,
    pub time_of_day: TodPreset,
    pub weather: WeatherPreset,
}

impl CaseTuple {
    /// Hour of day and weather of the parameter set.
    pub fn environment(&self) -> (f64, Weather) {
        (self.time_of_day.hour(), self.weather.weather())
    }
}

impl fmt::Display for CaseTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}, {}, {}, {}, {}}}",
            self.variant.perception.label(),
            self.variant.planning.label(),
            self.variant.control.label(),
            self.time_of_day.label(),
            self.weather.label()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub case_id: u32,
    #[serde(flatten)]
    pub tuple: CaseTuple,
    pub seed: u64,
    pub max_duration: f64,
    pub scenario: String,
}

/// Per-case seed: first output of the base seed's ChaCha stream `case_id`.
pub fn case_seed(base: u64, case_id: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(case_id as u64);
    rng.next_u64()
}

pub fn generate_matrix(axes: &Axes, base_seed: u64, max_duration: f64, scenario: &str) -> Result<Vec<TestCase>, ConfigError> {
    axes.validate()?;
    Ok((1..=axes.len() as u32)
        .map(|id| TestCase {
            case_id: id,
            tuple: axes.decode(id).expect("id within range"),
            seed: case_seed(base_seed, id),
            max_duration,
            scenario: scenario.to_string(),
        })
        .collect())
}

/// One `AXIS=VALUE[|VALUE…]` or id/range term of a case filter.
#[derive(Debug, Clone, PartialEq)]
enum Term {
    Ids(u32, u32),
    Axis(String, Vec<String>),
}

/// Conjunction of terms separated by `,`. Examples: `C3=C3.2`,
/// `C1=C1.2,P1=P1.1|P1.2`, `15`, `id=1-8`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseFilter {
    terms: Vec<Term>,
}

impl FromStr for CaseFilter {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut terms = Vec::new();
        for raw in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) = match raw.split_once('=') {
                Some((k, v)) => (k.trim().to_ascii_uppercase(), v.trim()),
                None => ("ID".to_string(), raw),
            };
            let term = if key == "ID" {
                let parse = |x: &str| x.trim().parse::<u32>().map_err(|_| ConfigError::Parse(format!("bad case id in filter term `{raw}`")));
                match value.split_once('-') {
                    Some((a, b)) => Term::Ids(parse(a)?, parse(b)?),
                    None => {
                        let id = parse(value)?;
                        Term::Ids(id, id)
                    }
                }
            } else if ["C1", "C2", "C3", "P1", "P2"].contains(&key.as_str()) {
                let values: Vec<String> = value.split('|').map(|v| v.trim().to_ascii_uppercase()).collect();
                if let Some(bad) = values.iter().find(|v| !v.starts_with(&format!("{key}."))) {
                    return Err(ConfigError::Parse(format!("value {bad} does not belong to axis {key}")));
                }
                Term::Axis(key, values)
            } else {
                return Err(ConfigError::Parse(format!("unknown filter axis `{key}`")));
            };
            terms.push(term);
        }
        Ok(Self { terms })
    }
}

impl CaseFilter {
    pub fn matches(&self, case: &TestCase) -> bool {
        self.terms.iter().all(|t| match t {
            Term::Ids(a, b) => (*a..=*b).contains(&case.case_id),
            Term::Axis(axis, values) => {
                let t = &case.tuple;
                let label = match axis.as_str() {
                    "C1" => t.variant.perception.label(),
                    "C2" => t.variant.planning.label(),
                    "C3" => t.variant.control.label(),
                    "P1" => t.time_of_day.label(),
                    _ => t.weather.label(),
                };
                values.iter().any(|v| v == label)
            }
        })
    }

    pub fn apply(&self, cases: Vec<TestCase>) -> Vec<TestCase> {
        cases.into_iter().filter(|c| self.matches(c)).collect()
    }
}
