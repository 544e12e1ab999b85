//! Library side of the `cmv` binary: configuration handling and subcommands.

// `!(x < bound)` checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
