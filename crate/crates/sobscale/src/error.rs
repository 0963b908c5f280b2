//! Error type shared by all library modules.

/// Errors reported by construction and evaluation routines.
///
/// Variants carry a human-readable message naming the violated rule and the
/// offending values, so callers (and the CLI) can surface them directly.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Mismatched lattice dimensions, or an empty index vector.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Structurally incompatible containers (wrong value count, wrong box).
    #[error("shape error: {0}")]
    Shape(String),

    /// A parameter outside its documented range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An evaluator was queried outside its domain, or produced a
    /// non-positive value where positivity is required.
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid too coarse for the requested box (sampling rule violated).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A requested closed-form oracle is not available for this object.
    #[error("capability error: {0}")]
    Capability(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An input that makes the requested quantity undefined (for example a
    /// zero vector where a normalized maximizer is required).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
