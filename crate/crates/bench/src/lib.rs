//! Benchmark harness for the GHAM solver: run specifications, CSV records,
//! scaling fits and the command implementations behind the `gham` binary.

pub mod commands;
pub mod config;
pub mod fit;
pub mod record;

pub use commands::{cmd_compare, cmd_scaling, cmd_solve, cmd_sweep_hbar, CmdError, Status};
pub use config::{ConfigError, Hbar, ProblemSpec, SolverKind};
pub use fit::ScalingFit;
pub use record::{BenchRecord, CSV_HEADER};
