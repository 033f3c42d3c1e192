//! Command-line and HTTP front ends for capweave projects.

pub mod api;
pub mod cli;
pub mod error;
pub mod query;

pub use cli::{run, CommandResult};
pub use error::{ErrorKind, ShellError};
