use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size cap exceeded: {what} needs {needed}, cap is {cap}")]
    SizeCap {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("no convergence after {iterations} iterations (bracket [{lower}, {upper}] nats)")]
    NonConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("simplex iteration cap of {0} reached (Bland's rule was engaged)")]
    LpIterationCap(usize),

    #[error("feasible set is empty: input {x} emits output {y} but no admissible z exists")]
    EmptyFeasibleSet { x: usize, y: usize },

    #[error("constraint polytope is empty")]
    EmptyPolytope,

    #[error("channel is not a member of the required surely-degraded set: {0}")]
    NotMember(String),

    #[error("composed coupling violates membership at (x={x}, y1={y1}, y3={y3}); transitivity check failed")]
    LemmaViolation { x: usize, y1: usize, y3: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
