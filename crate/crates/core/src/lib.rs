pub mod error;
pub mod geometry;
pub mod hum_control;
pub mod lebeau_robbiano;
pub mod propagator;
pub mod quadratic;
pub mod scenario;
pub mod tvsys;

pub use error::{Error, Result};
