//! Std companion to `obrb-core`: the run configuration grammar, checkpoint
//! and CSV formats, the time loop, and the verification suites behind the
//! `obrb` command.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod suites;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
