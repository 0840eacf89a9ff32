use thiserror::Error;

use crate::discovery::DiscoveryTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("SymNav variant {0} is outside 1..=15")]
    VariantOutOfRange(i64),

    #[error("action component {index} = {value} is outside [-1, 1]")]
    ActionOutOfBounds { index: usize, value: f64 },

    #[error("non-finite state after step from s={s:?} with a={a:?}")]
    NonFiniteStep { s: Vec<f64>, a: Vec<f64> },

    #[error("flow integration produced a non-finite state at step {step}")]
    NonFiniteFlow { step: usize },

    #[error("structure discovery diverged at step {step} (loss {loss:e})")]
    Diverged {
        step: usize,
        loss: f64,
        trace: Box<DiscoveryTrace>,
    },

    #[error("generator field vanishes on the probe set; alignment is undefined")]
    ZeroField,

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
