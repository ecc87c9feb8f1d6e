//! Experiment orchestration: config files, seeded runs with resume, pooled
//! aggregates and plot-ready data.

mod config;
mod plot;
mod run;

use std::path::Path;

use thiserror::Error;

pub use config::{AgentSpec, Algorithm, EnvSpec, ExperimentConfig, MonitorKind, PlotSpec};
pub use plot::{emit_plot_data, PlotManifest, PlotSeries};
pub use run::{
    evaluate_agent, run_experiment, run_experiment_with, train_agent, ExperimentSummary, RunOptions, RunOutput, RunRecord,
    RunStatus,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("asset {asset}: {message}")]
    Asset { asset: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path} was produced by a different config (hash {found}, expected {expected})")]
    HashMismatch {
        path: String,
        found: String,
        expected: String,
    },
    #[error("no aggregate curves under {0}")]
    MissingAggregate(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> HarnessError {
        HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Writes via a sibling temp file so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests;
