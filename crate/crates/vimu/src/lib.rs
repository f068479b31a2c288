//! File formats, configuration, fixtures and the `vimu` command-line
//! pipeline built on [`vimu_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod fixture;
pub mod format;
pub mod io;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
