//! Experiment configuration, Monte-Carlo orchestration, and rate fitting.

pub mod config;
pub mod fit;
pub mod runner;

pub use config::ExperimentConfig;
pub use fit::{fit_rate, RateFit};
pub use runner::{
    read_records_csv, simulate, split_seed, write_records_csv, Experiment, SimulationOutput,
    TrialRecord, CSV_HEADER,
};
