//! File formats, heatmaps, experiment configuration and the phantom-suite
//! harness around `eit-core`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod heatmap;
pub mod io;
pub mod suite;

pub use config::ExperimentConfig;
pub use error::{LabError, Result, Stage};
pub use experiment::{run_pipeline, summarize, DomainContext, ExperimentBundle, RunRecord};
