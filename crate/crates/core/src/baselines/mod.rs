//! Reference solvers for comparison with GHAM.

mod newton;
mod sham;

pub use newton::{frechet_operator, newton_solve, NewtonRun};
pub use sham::{sham_solve, CollocationOperator, SHAM_SOFT_LIMIT};
