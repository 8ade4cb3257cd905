use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(&'static str),

    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("model has no rules yet")]
    EmptyModel,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("snapshot is not an engine snapshot (bad magic)")]
    BadMagic,

    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u16),

    #[error("snapshot stores {found}-byte scalars, expected {expected}")]
    ScalarWidth { expected: u8, found: u8 },

    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
