//! File formats, image IO, configuration and the `crackbench` command line
//! on top of [`crackbench_core`].

pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod formats;
pub mod imageio;
pub mod output;

pub use error::{Error, Result};
