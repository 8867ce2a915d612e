use std::fmt;

use crate::topology::TopologyVariant;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The training graph admits no alignment of the requested length.
    #[error("infeasible alignment: no path of {frames} frames for {labels} labels under {variant}")]
    InfeasibleAlignment {
        frames: usize,
        labels: usize,
        variant: TopologyVariant,
    },

    #[error("lattice has no path from start to final")]
    NoPath,

    #[error("enumeration too large: {0}")]
    TooLarge(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }

    pub(crate) fn parse(line: usize, msg: impl fmt::Display) -> Self {
        Error::Parse {
            line,
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
