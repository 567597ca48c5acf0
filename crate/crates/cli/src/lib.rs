//! Batch front end for `dbar-core`: configuration handling and command drivers
//! behind the `dbarlab` binary.

pub mod commands;
pub mod config;
