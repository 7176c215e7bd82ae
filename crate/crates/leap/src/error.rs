//! Error type shared across the crate.
//!
//! Every fallible operation returns [`LeapError`]. Callers that drive whole
//! experiments (the CLI, the meta training loop) rely on the variant to decide
//! whether a failure is a configuration problem, a recoverable numerical event
//! (a single diverging inner run) or a fatal numerical breakdown.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum LeapError {
    /// Invalid configuration supplied by the caller (bad hyperparameter,
    /// empty distribution, malformed experiment file, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Two objects that must agree on dimension do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A loss, gradient or parameter vector stopped being finite.
    #[error("non-finite {what} encountered at step {step}")]
    NonFinite { what: &'static str, step: usize },

    /// An inner training run crossed the divergence threshold. The meta loop
    /// treats this as recoverable: the offending task is dropped from its
    /// batch.
    #[error("inner training diverged at step {step} (loss {loss:.6e})")]
    Divergence { step: usize, loss: f64 },

    /// An iterative numerical routine failed to converge or produced an
    /// unusable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The operation is outside the supported envelope (dimension caps on the
    /// eigensolver, grid searches above three parameters, ...).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A checkpoint file is missing, truncated or malformed.
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

impl LeapError {
    /// Whether the error describes a single unstable inner run rather than a
    /// structural problem. The meta step drops such tasks instead of aborting.
    pub fn is_recoverable_divergence(&self) -> bool {
        matches!(
            self,
            LeapError::Divergence { .. } | LeapError::NonFinite { .. }
        )
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, LeapError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_is_recoverable() {
        assert!(LeapError::Divergence {
            step: 3,
            loss: 1e13
        }
        .is_recoverable_divergence());
        assert!(LeapError::NonFinite {
            what: "loss",
            step: 0
        }
        .is_recoverable_divergence());
        assert!(!LeapError::Config("x".into()).is_recoverable_divergence());
    }

    #[test]
    fn messages_carry_context() {
        let err = LeapError::DimensionMismatch {
            context: "inner_step",
            expected: 4,
            actual: 3,
        };
        let msg = err.to_string();
        assert!(msg.contains("inner_step"));
        assert!(msg.contains('4') && msg.contains('3'));
    }
}
