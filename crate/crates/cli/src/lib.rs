#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Library side of the `fragdiff` command: configuration, I/O and the
//! subcommand implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod verify;
