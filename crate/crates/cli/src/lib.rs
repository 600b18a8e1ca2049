//! Command line front end and HTTP API of the cell peeling pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod ops;
pub mod render;
pub mod server;

pub use error::CliError;
