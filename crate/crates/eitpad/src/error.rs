//! Error taxonomy shared by every module in the crate.
//!
//! Everything fallible returns [`Result`]. Variants are grouped roughly by
//! the stage that raises them: construction/validation, file I/O and parsing,
//! placement on a surface, and numerics.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mesh failed one of its structural invariants (names the invariant).
    #[error("mesh invariant violated: {0}")]
    MeshInvariant(String),

    /// A mesh file could not be parsed. `line` is 1-based.
    #[error("mesh format error at line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Two electrodes snapped to the same mesh node.
    #[error("electrode collision: electrodes {a} and {b} both snapped to node {node}")]
    ElectrodeCollision { a: usize, b: usize, node: usize },

    /// A requested position cannot be realised on the domain surface.
    #[error("position not on surface: {0}")]
    OffSurface(String),

    /// A channel or channel plan is malformed.
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    /// A linear system could not be factorised or solved.
    #[error("singular system: {0}")]
    Singular(String),

    /// Two collections that must agree in size do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input is degenerate for the requested statistic (zero vector,
    /// zero variance, zero starting value, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A configuration file is missing, unreadable, or semantically invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A tabular data file (CSV) is malformed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand used all over: `Error::param(format!(...))`.
    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
