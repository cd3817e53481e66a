use std::path::PathBuf;

use thiserror::Error;

use crate::normalize::{ScalabilityReport, SinkhornReport, Variant};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("eigensolver failed to reach the residual bound (achieved {residual:.3e}, required {required:.3e})")]
    Eigen { residual: f64, required: f64 },

    #[error("degenerate kernel: row {row} has zero sum")]
    DegenerateKernel { row: usize },

    #[error("{0}")]
    NotScalable(ScalabilityReport),

    #[error(
        "Sinkhorn scaling did not converge after {} iterations (ratio gap {:.3e}); increase epsilon",
        .0.iters, .0.final_ratio_gap
    )]
    NotConverged(Box<SinkhornReport>),

    #[error("expected a {expected} affinity matrix, got {found}")]
    Variant { expected: Variant, found: Variant },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("study failed: {0}")]
    Study(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Eigen { .. } | Error::NotConverged(_) | Error::Study(_)
        )
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
