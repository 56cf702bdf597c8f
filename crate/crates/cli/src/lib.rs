//! Command-line front end: TOML configs in, run directories out.

pub mod commands;
pub mod config;
pub mod output;
