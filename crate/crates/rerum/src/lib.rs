//! File formats, run configuration and the command-line driver for
//! [`rerum_core`].

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
