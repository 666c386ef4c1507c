//! Library surface of the CLI: argument types, command implementations and
//! the file formats, shared with the integration and acceptance tests.

pub mod cli;
pub mod commands;
pub mod formats;
