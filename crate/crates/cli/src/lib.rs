//! Config-driven experiment runner for `jumpflow`.

pub mod config;
pub mod experiments;
pub mod manifest;

pub use config::{Experiment, RunConfig};
pub use manifest::{replay, run, Replay, RunManifest};
