//! Pipeline driver: configuration, staged artifacts, and the six
//! subcommands behind the `migrate` binary.

pub mod artifacts;
pub mod commands;
pub mod config;

/// A configuration or invocation problem; mapped to exit code 2, while
/// module fatals exit 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
