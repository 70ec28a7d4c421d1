use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Validation problems (bad input shapes,
/// sparsity mismatches, infeasible configurations) are kept separate from
/// I/O failures so the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum LdsError {
    #[error("resource index {k} out of range 0..={max}")]
    ResourceOutOfRange { k: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("sparsity pattern violated at (k={k}, j={j}): entry is nonzero where incidence is 0")]
    Sparsity { k: usize, j: usize },

    #[error("sparsity pattern violated at (k={k}, j={j}): entry is zero where incidence is 1")]
    MissingEntry { k: usize, j: usize },

    #[error("factor graph is not regular: {0}")]
    Irregular(String),

    #[error("matrix has no nonzero entry; cannot normalize")]
    AllZero,

    #[error("ring with squared radius {0} is empty")]
    EmptyRing(u64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("enumeration of {size} superimposed codewords exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u64 },

    #[error("degenerate pair: vectors coincide on every coordinate")]
    DegeneratePair,

    #[error("malformed JSON in {path}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LdsError {
    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, LdsError::Io { .. })
    }
}

pub type Result<T, E = LdsError> = std::result::Result<T, E>;
