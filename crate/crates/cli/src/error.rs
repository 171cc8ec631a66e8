use std::fmt;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or unwritable files.
    Io(String),
    /// Malformed scenario text or flags.
    Parse(String),
    /// Well-formed input that describes an invalid object or query.
    Semantic(String),
    /// A mathematical precondition of the command does not hold.
    Precondition(String),
    /// A library self-check failed.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Semantic(_) => 3,
            CliError::Precondition(_) => 4,
            CliError::Invariant(_) => 5,
        }
    }

    /// Prefixes the message with the scenario field it concerns.
    pub fn context(self, at: &str) -> Self {
        match self {
            CliError::Semantic(m) => CliError::Semantic(format!("{at}: {m}")),
            CliError::Precondition(m) => CliError::Precondition(format!("{at}: {m}")),
            other => other,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Semantic(m) => write!(f, "invalid scenario: {m}"),
            CliError::Precondition(m) => write!(f, "precondition violated: {m}"),
            CliError::Invariant(m) => write!(f, "internal invariant breach: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<minsing::Error> for CliError {
    fn from(e: minsing::Error) -> Self {
        use minsing::Error as E;
        match e {
            E::Precondition(m) => CliError::Precondition(m),
            E::Invariant(m) => CliError::Invariant(m),
            other => CliError::Semantic(other.to_string()),
        }
    }
}
