use thiserror::Error;

use crate::NodeId;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("position ({x}, {y}) lies outside the domain [0, {side})^2")]
    OutsideDomain { x: f64, y: f64, side: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("smoothness bound is vacuous: denominator {denominator} is not positive")]
    Horizon { denominator: f64 },

    #[error("destination {dest} is unreachable from {from}")]
    Unreachable { from: NodeId, dest: NodeId },

    #[error("protocol invariant violated: {0}")]
    InvariantViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
