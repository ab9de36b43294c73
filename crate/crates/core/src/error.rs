use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline stage tags attached to errors raised inside [`crate::factorize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    FixedPoint,
    Rotation,
    Split,
    Normalize,
    Propagate,
    Partition,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::FixedPoint => "fixed-point",
            Stage::Rotation => "rotation",
            Stage::Split => "split",
            Stage::Normalize => "normalize",
            Stage::Propagate => "propagate",
            Stage::Partition => "partition",
            Stage::Verify => "verify",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("newton inversion did not converge: best residual {best_residual:e} after {iterations} iterations")]
    NonConvergence {
        best_residual: f64,
        iterations: usize,
    },

    #[error("map is not supported in the required ball: {0}")]
    NotSupported(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("partition step underflow at t = {t} (step {step:e}): bounds are inconsistent")]
    StepUnderflow { t: f64, step: f64 },

    #[error("singular jacobian at {0}")]
    Singular(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
