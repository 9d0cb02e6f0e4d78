//! Experiment orchestration: babbling, training, frozen testing, metrics,
//! persistence and plots.

mod checkpoint;
mod config;
mod experiment;
mod io;
mod metrics;
mod plot;
mod run;

use thiserror::Error;

pub use checkpoint::{agent_hash, load_checkpoint, save_checkpoint, Metadata, METADATA_FILE};
pub use config::{BabblePolicy, ExperimentConfig, DESK_HIDDEN};
pub use experiment::{
    generalization_experiment, parallel_map, run_and_test, run_dir, run_seeds, GeneralizationRow,
    RunMetrics,
};
pub use io::{
    export_csv, read_csv, read_records_from, records_to_string, write_records_to, CSV_HEADER,
};
pub use metrics::{
    episodes_to_reach, habitual_fraction, mean, mean_time_cost, moving_average, success_series,
    time_cost, EpisodeRecord, TestSummary,
};
pub use plot::{emit_plots, find_csvs, SMOOTHING_WINDOW};
pub use run::{
    clamp_action, evaluate, test_targets, train_run, Agent, FrozenRun, RunState, TrainedRun,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Arbitrator(#[from] crate::arbitrator::ArbitratorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
    #[error("plot: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
