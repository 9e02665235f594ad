use thiserror::Error;

pub type Result<T, E = SortError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SortError {
    /// Two elements carry the same (key, origin_pe, origin_pos) identity.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("message addressed to PE {dest}, outside of {lo}..{hi}")]
    Addressing { dest: usize, lo: usize, hi: usize },

    #[error("index {index} outside permutation domain 0..{size}")]
    OutOfDomain { index: u64, size: u64 },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl SortError {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        SortError::Precondition(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SortError::Config(msg.into())
    }
}
