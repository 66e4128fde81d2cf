//! File formats, configuration and command-line driver for
//! [`specpol_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;

pub use error::{Error, Result};
pub use specpol_core;
