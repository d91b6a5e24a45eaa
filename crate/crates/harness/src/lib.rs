//! Experiment driver: configuration, the convergence, conditioning and
//! mesh perturbation studies, and their CSV output.

pub mod config;
pub mod experiments;
pub mod table;

use std::fs;
use std::path::PathBuf;

pub use config::{ExperimentConfig, GeometryKind};
pub use experiments::{Experiment, SweepSample};
pub use table::Table;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] cutdg::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 2 for bad configuration, 3 for everything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) | Self::Io(_) => 3,
        }
    }
}

/// Runs `experiment` and writes `<output>/<experiment>.csv`.
pub fn run_to_file(experiment: Experiment, cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    cfg.validate()?;
    let table = experiment.run(cfg)?;
    fs::create_dir_all(&cfg.output)?;
    let path = cfg.output.join(experiment.file_name());
    fs::write(&path, table.to_csv_string())?;
    Ok(path)
}
