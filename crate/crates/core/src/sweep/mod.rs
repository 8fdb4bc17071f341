//! Experiment harness: specs, runners, CSV/JSON output, and SVG plots for
//! the synthetic studies.

pub mod csvio;
pub mod runner;
pub mod spec;
pub mod svg;

pub use csvio::{write_results_csv, Field, SweepResult};
pub use runner::run_experiment;
pub use spec::ExperimentSpec;
