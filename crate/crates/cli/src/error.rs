//! Failure categories reported on stderr as one JSON object.

use std::fmt;

use serde::Serialize;
use vasmg::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    /// Inconsistent or out-of-range options.
    ConfigError,
    /// Unreadable or malformed mesh, matrix, vector or boundary file.
    InputError,
    /// Assembly, hierarchy or solver failure.
    SolverError,
    /// The iteration cap was reached; artifacts are still written.
    NotConverged,
    /// An artifact could not be written.
    OutputError,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Self::ConfigError => "config-error",
            Self::InputError => "input-error",
            Self::SolverError => "solver-error",
            Self::NotConverged => "not-converged",
            Self::OutputError => "output-error",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::NotConverged => 1,
            Self::ConfigError => 2,
            Self::InputError => 3,
            Self::SolverError => 4,
            Self::OutputError => 5,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::ConfigError, message)
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(Category::InputError, message)
    }

    /// Library error met while reading `what`.
    pub fn reading(what: &str, e: Error) -> Self {
        Self::input(format!("{what}: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "status": "error",
            "category": self.category,
            "message": self.message,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let category = match e {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::InvalidMesh(_)
            | Error::DegenerateElement(_)
            | Error::InvalidMaterial(_)
            | Error::InvalidBoundary(_)
            | Error::DuplicateVertex(..)
            | Error::OutsideRegion(_) => Category::InputError,
            Error::InvalidArgument(_) => Category::ConfigError,
            _ => Category::SolverError,
        };
        Self::new(category, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
