//! File formats, experiment archives and the command line front end for
//! `groundlab-core`.

pub mod archive;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
