//! Exit codes and the machine-readable error record.

use std::path::Path;

use qlab::Error;

/// Stable exit-code map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// A study ran but its verdict is `fail`.
    Verdict,
    /// Command-line usage (emitted by the argument parser).
    Usage,
    FileNotFound,
    Parse,
    Validation,
    ConditionViolated,
    Numerical,
    Io,
}

impl Kind {
    pub fn code(self) -> i32 {
        match self {
            Kind::Verdict => 1,
            Kind::Usage => 2,
            Kind::FileNotFound => 3,
            Kind::Parse => 4,
            Kind::Validation => 5,
            Kind::ConditionViolated => 6,
            Kind::Numerical => 7,
            Kind::Io => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Verdict => "VerdictFail",
            Kind::Usage => "Usage",
            Kind::FileNotFound => "FileNotFound",
            Kind::Parse => "Parse",
            Kind::Validation => "Validation",
            Kind::ConditionViolated => "ConditionViolated",
            Kind::Numerical => "Numerical",
            Kind::Io => "Io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> CliError {
        CliError { kind, message: message.into() }
    }

    pub fn io_at(path: &Path, e: std::io::Error) -> CliError {
        let kind = if e.kind() == std::io::ErrorKind::NotFound { Kind::FileNotFound } else { Kind::Io };
        CliError::new(kind, format!("{}: {e}", path.display()))
    }

    pub fn from_lib(e: Error) -> CliError {
        let kind = match &e {
            Error::SeedFailed { source, .. } => CliError::from_lib((**source).clone()).kind,
            Error::Parse(_) => Kind::Parse,
            Error::Io(_) => Kind::Io,
            Error::ConditionViolated(_) => Kind::ConditionViolated,
            Error::NonConvergence(_)
            | Error::SingularSystem
            | Error::NotIrreducible
            | Error::NotIrreducibleAt(_)
            | Error::IterateEscaped(_)
            | Error::StepsizeTooLarge(_)
            | Error::LambdaUnderflow(_)
            | Error::HorizonOverflow(_)
            | Error::NonPositiveValue(_)
            | Error::TooFewPoints { .. } => Kind::Numerical,
            _ => Kind::Validation,
        };
        CliError::new(kind, e.to_string())
    }

    pub fn context(mut self, what: &str) -> CliError {
        self.message = format!("{what}: {}", self.message);
        self
    }

    /// One JSON object on a single line.
    pub fn record(&self) -> String {
        serde_json::json!({
            "error": self.kind.name(),
            "code": self.kind.code(),
            "message": self.message,
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(Kind::Io, e.to_string())
    }
}
