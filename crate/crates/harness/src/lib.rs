//! Experiment harness: scenario configs, sweeps, property suites and the
//! hide-and-seek detection experiment.

pub mod config;
pub mod hide_and_seek;
pub mod scenario;
pub mod stats;
pub mod verify;

use config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] sublinear::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
    #[error("unknown suite `{0}` (expected one of mirror, maurey, wire, losses, datagen, protocols, all)")]
    UnknownSuite(String),
}
