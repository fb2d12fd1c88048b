//! Command failures and their exit codes.

use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum Failure {
    /// A required input is absent. Exit 2.
    Missing(String),
    /// An output cannot be written, or another filesystem error. Exit 2.
    Io(String),
    /// Bad configuration or a violated precondition. Exit 3.
    Config(String),
    /// Anything else. Exit 1.
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Missing(_) | Failure::Io(_) => 2,
            Failure::Config(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            Failure::Missing(m) => Failure::Missing(format!("{what}: {m}")),
            Failure::Io(m) => Failure::Io(format!("{what}: {m}")),
            Failure::Config(m) => Failure::Config(format!("{what}: {m}")),
            Failure::Other(m) => Failure::Other(format!("{what}: {m}")),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Missing(m) | Failure::Io(m) | Failure::Config(m) | Failure::Other(m) => f.write_str(m),
        }
    }
}

impl From<tstf::Error> for Failure {
    fn from(e: tstf::Error) -> Self {
        let msg = e.to_string();
        match e {
            tstf::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => Failure::Missing(msg),
            tstf::Error::Io { .. } => Failure::Io(msg),
            tstf::Error::Config(_) | tstf::Error::Contract(_) => Failure::Config(msg),
            tstf::Error::Dimension { .. } | tstf::Error::Format(_) => Failure::Other(msg),
        }
    }
}
