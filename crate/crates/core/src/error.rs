use crate::prelude::*;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("too few draws: need at least {need}, got {got}")]
    TooFewDraws { need: usize, got: usize },

    #[error("filter covariance lost positive definiteness at t={t} (row {row})")]
    FilterBreakdown { row: usize, t: usize },

    #[error("{block} failed at sweep {sweep}{}: {detail}", series_suffix(.series))]
    Sweep {
        block: &'static str,
        series: Option<usize>,
        sweep: usize,
        detail: String,
    },
}

fn series_suffix(series: &Option<usize>) -> String {
    match series {
        Some(i) => alloc::format!(" (series {i})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach sweep coordinates to a block-level failure.
    pub(crate) fn in_sweep(self, block: &'static str, series: Option<usize>, sweep: usize) -> Self {
        match self {
            e @ Error::Sweep { .. } => e,
            other => Error::Sweep {
                block,
                series,
                sweep,
                detail: other.to_string(),
            },
        }
    }
}
