//! Library side of the `tpm` command: workspace persistence, subcommands,
//! DOT export, the shell and the synthetic benchmark.

pub mod bench;
pub mod commands;
pub mod dot;
pub mod error;
pub mod repl;
pub mod script;
pub mod workspace;
