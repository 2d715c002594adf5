//! File formats, experiment configuration, plotting and the experiment
//! harness around `vaforce-core`.

pub mod config;
pub mod csvio;
pub mod error;
pub mod harness;
pub mod manifest;
pub mod mtx;
pub mod plot;
pub mod report;

pub use config::ExperimentConfig;
pub use error::IoError;
