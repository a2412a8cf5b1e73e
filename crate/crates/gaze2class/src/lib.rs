//! File formats, configuration and command implementations for the
//! `gaze2class` command-line tool. The numerics live in `gaze2class-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod gaze_csv;
pub mod imageio;
pub mod manifest;
pub mod reports;

pub use error::{Error, Result};
