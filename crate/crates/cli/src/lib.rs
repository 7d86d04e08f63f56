//! Command-line harness around `snn-stdp`: reproducible train, eval,
//! trace and rule-comparison runs driven by a TOML config.

pub mod cli;
pub mod commands;
pub mod config;
pub mod rundir;

pub use commands::{cmd_compare_rules, cmd_eval, cmd_trace, cmd_train};
pub use config::RunConfig;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
