use std::fmt;

/// A single violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Config(Vec<Violation>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {kind} index {index}")]
    UnknownIndex { kind: &'static str, index: usize },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config(vec![Violation {
            field: field.into(),
            reason: reason.into(),
        }])
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
