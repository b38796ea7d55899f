use std::path::PathBuf;

use meshfim_core::detect::DetectError;
use meshfim_core::gate::GateError;
use meshfim_core::generators::GenerateError;
use meshfim_core::mesh::MeshError;
use meshfim_core::metrics::MetricsError;
use meshfim_core::region::RegionError;
use meshfim_core::repair::RepairError;
use meshfim_core::tokenizer::TokenError;
use thiserror::Error;

use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combinations that clap cannot catch on its own.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Mesh { path: PathBuf, source: MeshError },
    #[error(transparent)]
    Geometry(#[from] MeshError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("could not write image {path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("service: {0}")]
    Service(String),
}

impl CliError {
    /// 2 for usage problems, 1 for everything the pipeline rejects.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
