use std::fmt;

/// Failures of a command, each with its exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Invalid config, flag or parameter. Exit 2.
    Config(String),
    /// Corrupt or tampered input file. Exit 3.
    Integrity(String),
    /// The solver stopped early. Exit 4.
    Solver(String),
    /// Reading or writing failed for another reason. Exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Integrity(_) => 3,
            CliError::Solver(_) => 4,
        }
    }

    pub fn io(context: impl fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }

    /// The more severe of two failures, by exit status.
    pub fn worst(self, other: CliError) -> CliError {
        let rank = |e: &CliError| match e {
            CliError::Io(_) => 0,
            CliError::Solver(_) => 1,
            CliError::Integrity(_) => 2,
            CliError::Config(_) => 3,
        };
        if rank(&other) > rank(&self) {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Integrity(m) => write!(f, "integrity error: {m}"),
            CliError::Solver(m) => write!(f, "solver aborted: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
