use std::path::PathBuf;

use thiserror::Error;

use crate::simulate::SimResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Exogenous demand at or beyond the stall capacity that can absorb it.
    #[error("unstable: {0}")]
    Unstable(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(
        "fixed point did not converge after {iterations} iterations (last max residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error(
        "block {block}: congestion cap {cap} is infeasible, the lowest attainable rejection rate in the price range is {min_rejection}"
    )]
    Infeasible {
        block: String,
        cap: f64,
        min_rejection: f64,
    },

    #[error("{}: {message}", location(.file, .line, .field))]
    Parse {
        file: PathBuf,
        line: Option<u64>,
        field: Option<String>,
        message: String,
    },

    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("graph: {0}")]
    Graph(String),

    #[error("network overloaded: {circulating} drivers circulating exceeds the watchdog bound {bound}")]
    Overload {
        circulating: usize,
        bound: usize,
        partial: Box<SimResult>,
    },

    #[error("missing upstream result: {0}")]
    MissingResult(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn location(file: &std::path::Path, line: &Option<u64>, field: &Option<String>) -> String {
    let mut s = file.display().to_string();
    if let Some(line) = line {
        s.push_str(&format!(" line {line}"));
    }
    if let Some(field) = field {
        s.push_str(&format!(" field `{field}`"));
    }
    s
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Unstable(_)
            | Error::Numeric(_)
            | Error::NotConverged { .. }
            | Error::Infeasible { .. }
            | Error::Overload { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation => 2,
            ErrorClass::Numeric => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
