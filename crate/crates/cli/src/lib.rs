//! Library side of the `turnpike` command-line tool: the config format and
//! the subcommands.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{exit, run, CliError, Command, Options};
pub use config::{emit_config, parse_config, ConfigError, HeatDemo, InitialState, Preset, ProblemSource, RunConfig};
