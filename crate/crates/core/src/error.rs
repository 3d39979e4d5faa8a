use alloc::string::String;

/// Errors raised by the solver core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZkError {
    /// Input violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The x-mode root finder failed for a given mode.
    #[error("basis construction failed at x-mode {mode}: {reason}")]
    Construction { mode: usize, reason: String },

    /// The implicit system could not be factorised.
    #[error("singular implicit system (pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },

    /// The state left the trusted range.
    #[error("blow-up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },

    /// The requested regime is outside what the model supports.
    #[error("unsupported regime: {0}")]
    Unsupported(String),
}

impl ZkError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        ZkError::Validation(msg.into())
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ZkError::Construction { .. } | ZkError::Singular { .. } | ZkError::BlowUp { .. }
        )
    }
}

pub type Result<T, E = ZkError> = core::result::Result<T, E>;
