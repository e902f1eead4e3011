use std::fmt;

use avppi_core::ErrorKind;

/// Exit status of the command line, by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Config = 2,
    Data = 3,
    Numerical = 4,
}

/// An error carrying the exit status it should produce.
#[derive(Debug, Clone, PartialEq)]
pub struct AppError {
    pub exit: Exit,
    pub message: String,
}

impl AppError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Data,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            exit: Exit::Numerical,
            message: message.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.exit as i32
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

impl From<avppi_core::Error> for AppError {
    fn from(e: avppi_core::Error) -> Self {
        let exit = match e.kind() {
            ErrorKind::Config => Exit::Config,
            ErrorKind::Data => Exit::Data,
            // Undefined states only surface here when nothing skipped them.
            ErrorKind::Numerical | ErrorKind::Undefined => Exit::Numerical,
        };
        Self {
            exit,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::data(format!("I/O error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
