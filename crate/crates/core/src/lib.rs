//! Compensation of PDE actuator and sensor dynamics for unstable ODE plants
//! through explicit solutions of the cascade Sylvester equation.

pub mod config;
pub mod error;
pub mod linalg;
pub mod lti;
pub mod pde;
pub mod registry;
pub mod serde_rows;
pub mod simulate;
pub mod sylvester;
pub mod synthesis;

pub use config::Config;
pub use error::{CoreError, Result};
pub use registry::{Problem, Registry, Synthesis};
