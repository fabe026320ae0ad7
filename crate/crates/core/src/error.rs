use thiserror::Error;

/// Errors surfaced by configuration validation, operator synthesis and the
/// evaluation harness. Fitness evaluation itself never returns an error:
/// anything that would fail inside a simulation is mapped to the penalty
/// objective instead so optimizers see a total function.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented constraint. `path` is the
    /// dotted key path of the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric operation cannot be carried out (singular mapping, overflow).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A controller parameter vector is infeasible (negative gain or order).
    #[error("infeasible genome: {0}")]
    Infeasible(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
