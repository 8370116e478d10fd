use std::fmt;

/// Failure class of a run, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unreadable or invalid input files.
    Input,
    /// Bad flags, config values or requests.
    Usage,
    /// Anything else, including output I/O.
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Usage => 3,
            ErrorKind::Internal => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Input, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Usage, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Internal, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<bubbletrack::corpus::CorpusError> for CliError {
    fn from(e: bubbletrack::corpus::CorpusError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<bubbletrack::tracker::TrackerError> for CliError {
    fn from(e: bubbletrack::tracker::TrackerError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<bubbletrack::evaluation::EvaluationError> for CliError {
    fn from(e: bubbletrack::evaluation::EvaluationError) -> Self {
        CliError::usage(e.to_string())
    }
}
