use mismatch_core::Error as CoreError;
use serde_json::{json, Value};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Malformed(_) | CliError::Io { .. } => EXIT_MALFORMED,
            CliError::Core(e) => match e {
                CoreError::EmptyFeasibleSet { .. }
                | CoreError::EmptyPolytope
                | CoreError::NotMember(_)
                | CoreError::LemmaViolation { .. } => EXIT_INFEASIBLE,
                CoreError::NonConvergence { .. } | CoreError::LpIterationCap(_) => EXIT_NONCONVERGENCE,
                CoreError::DimensionMismatch(_)
                | CoreError::InvalidDistribution(_)
                | CoreError::InvalidMetric(_)
                | CoreError::InvalidArgument(_)
                | CoreError::SizeCap { .. } => EXIT_MALFORMED,
            },
        }
    }

    /// Machine-readable form, carrying the certificate or bracket when
    /// there is one.
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::Core(e) = self {
            match e {
                CoreError::EmptyFeasibleSet { x, y } => v["blocking_pair"] = json!({ "x": x, "y": y }),
                CoreError::NonConvergence { iterations, lower, upper } => {
                    v["bracket_nats"] = json!([lower, upper]);
                    v["iterations"] = json!(iterations);
                }
                CoreError::LemmaViolation { x, y1, y3 } => v["violation"] = json!({ "x": x, "y1": y1, "y3": y3 }),
                _ => {}
            }
        }
        v
    }
}
