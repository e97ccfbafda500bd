//! File formats, parallel benchmark drivers and the command implementations
//! behind the `edgewalk` binary.
//!
//! * [`idx`]: IDX digit files, plain or gzipped;
//! * [`model_file`]: versioned little-endian MLP files;
//! * [`report`]: per-image CSV, JSON aggregates, operating characteristic CSV;
//! * [`config`]: JSON run configurations;
//! * [`bench`]: rayon drivers with image-ordered merges;
//! * [`commands`]: `train`, `bench`, `quantpred` and `trace2d`.

pub mod bench;
pub mod commands;
pub mod config;
pub mod idx;
pub mod model_file;
pub mod report;

use std::path::PathBuf;

use edgewalk_core::attacks::AttackError;
use edgewalk_core::eval::EvalError;
use edgewalk_core::models::ModelError;
use edgewalk_core::quantization::QuantError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Idx(#[from] idx::IdxError),
    #[error("{path}: {source}")]
    ModelFile {
        path: PathBuf,
        #[source]
        source: model_file::ModelFileError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl From<AttackError> for Error {
    fn from(e: AttackError) -> Self {
        Error::Eval(e.into())
    }
}

impl Error {
    /// 2 for unusable inputs (configuration, files, parameters), 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Idx(_)
            | Error::ModelFile { .. }
            | Error::Io { .. }
            | Error::Model(_)
            | Error::Quant(_)
            | Error::Eval(EvalError::Attack(AttackError::InvalidParams(_)))
            | Error::Eval(EvalError::BudgetExceeded { .. }) => 2,
            _ => 1,
        }
    }
}
