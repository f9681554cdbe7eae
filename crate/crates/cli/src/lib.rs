//! Batch entry points for training, evaluating and inspecting HCRF opinion
//! classifiers. The `hcrf-opinion` binary is a thin argument parser over
//! [`commands`].

pub mod archive;
pub mod cli;
pub mod commands;
pub mod config;
pub mod logging;

pub use archive::ModelArchive;
pub use config::{ModelKind, RunConfig};
