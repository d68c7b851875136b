//! Batch front end for `dirpart`: run manifests, presets, best-of-N seeding, and file outputs.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{Mode, RunManifest, RunPlan};
pub use error::{CliError, Result};
pub use run::{run_manifest, RunOptions, RunReport};
