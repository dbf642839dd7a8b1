use alloc::string::String;
use thiserror::Error;

/// Errors raised by the core algorithms.
///
/// Messages always name the offending entity (face index, edge, field, or
/// dimension) so callers can surface them without extra context.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    /// Mesh connectivity is invalid (bad index, open edge, broken orientation).
    #[error("topology error: {0}")]
    Topology(String),
    /// An array has the wrong shape or an input is structurally incompatible.
    #[error("shape error: {0}")]
    Shape(String),
    /// A configuration or generator parameter is out of its valid range.
    #[error("parameter error: {0}")]
    Param(String),
    /// An input value is unusable (non-finite, empty, degenerate).
    #[error("input error: {0}")]
    Input(String),
}

pub type CoreResult<T> = core::result::Result<T, CoreError>;
