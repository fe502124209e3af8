//! Vehicle dynamics: configuration, closed-form sub-models, and the integrator.

mod config;
mod models;
mod spline;
mod state;
mod step;

pub use config::*;
pub use models::*;
pub use spline::*;
pub use state::{Commands, VehicleState};
pub use step::{step, suspension_step, Vehicle, BRAKE_STICK_SPEED, MAX_DT, SLIP_SPEED_FLOOR};
