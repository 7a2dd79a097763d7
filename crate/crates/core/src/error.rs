use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid resolution {n}: at least {min} points are required")]
    InvalidResolution { n: usize, min: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate operator: derivative order {order} is not below resolution {n}")]
    DegenerateOperator { order: usize, n: usize },

    #[error("coefficient function has {len} Chebyshev modes but the resolution is only {n}")]
    CoefficientTooRich { len: usize, n: usize },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("boundary functional of derivative order {order} cannot be imposed at resolution {n}")]
    BoundaryOrder { order: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is numerically singular at pivot {index} (scaled pivot {pivot:e})")]
    Singular { index: usize, pivot: f64 },

    #[error("homotopy state corrupted: {0}")]
    StateCorruption(String),

    #[error("iteration diverged at m = {iteration} with hbar = {hbar}")]
    Divergence { iteration: usize, hbar: f64 },

    #[error("no convergent hbar among {} samples", curve.len())]
    NoConvergentHbar { curve: Vec<(f64, f64)> },

    #[error("resolution {n} cannot resolve an order-{order} problem")]
    ResolutionTooLow { n: usize, order: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("maximum of {0} iterations reached without convergence")]
    MaxIterations(usize),
}
