//! Crate-wide error type.
//!
//! Errors fall into two broad classes so that callers (notably the CLI) can
//! map them onto distinct exit codes: [`Error::Domain`] for violated
//! preconditions and invalid configuration, and [`Error::Parse`] /
//! [`Error::Io`] for bad or unreadable input data.

use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition or domain invariant was violated.
    #[error("{0}")]
    Domain(String),

    /// A data file contained a malformed or invalid row.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// An I/O operation failed.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed input data, as
    /// opposed to violated domain preconditions.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
