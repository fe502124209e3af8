//! Off-road vehicle digital twin with an automated verification and
//! validation harness.

pub mod autonomy;
pub mod bridge;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod sensors;

pub use error::{ConfigError, SimError};
