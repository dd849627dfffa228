pub mod asymptotics;
pub mod checks;
pub mod error;
pub mod experiments;
pub mod iid_weibull;
pub mod limit_laws;
pub mod model;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod suprema;

pub use error::{Error, Result};
