//! File formats, experiment orchestration and the command line for the
//! `qrouting-core` simulator.

use std::path::{Path, PathBuf};

pub mod cli;
pub mod experiment;
pub mod output;
pub mod topology_io;

pub use experiment::{
    run_comparison, run_load_sweep, settling_verdict, Comparison, ExperimentSpec, SweepRow,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    TopologyFile {
        path: PathBuf,
        source: qrouting_core::TopologyError,
    },
    #[error(transparent)]
    Topology(#[from] qrouting_core::TopologyError),
    #[error(transparent)]
    Engine(#[from] qrouting_core::EngineError),
    #[error(transparent)]
    Curve(#[from] qrouting_core::CurveError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_owned(),
            source,
        }
    }
}
