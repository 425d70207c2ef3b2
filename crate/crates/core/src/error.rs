use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its valid range.
    #[error("invalid parameter {name} = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Matrix or register dimensions do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A state or operator failed a physicality check.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A circuit is malformed.
    #[error("bad circuit: {0}")]
    Circuit(String),

    /// A configuration file or value could not be used.
    #[error("bad configuration: {0}")]
    Config(String),

    /// A hard resource cap (system size, branch count) was exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Decay fitting could not produce a usable result.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Circuit (de)serialization failed.
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
