pub mod assembly;
pub mod baselines;
pub mod error;
pub mod ham;
pub mod linsolve;
pub mod problem;
pub mod spectral;

pub use error::{Error, Result};
