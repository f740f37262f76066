use std::fmt;

use fdb_core::FdbError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Io,
    Invariant,
}

/// A failure carrying its process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Usage, message: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Io, message: msg.into() }
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Invariant, message: msg.into() }
    }

    /// 1 usage, 2 I/O, 3 invariant violation.
    pub fn code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Io => 2,
            ErrorKind::Invariant => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<FdbError> for CliError {
    fn from(e: FdbError) -> Self {
        let message = e.to_string();
        if e.is_io() {
            Self::io(message)
        } else if matches!(e, FdbError::Config { .. }) {
            Self::usage(message)
        } else {
            Self::invariant(message)
        }
    }
}
