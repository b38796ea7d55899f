//! Patch generators: anything that proposes replacement faces for a target
//! region given its context.
//!
//! A generator returns a self-contained patch (its own vertex table). Welding
//! it into the mesh is the repair pipeline's job.

mod external;
mod oracle;
mod stitch;
mod triangulate;

pub use external::ExternalGenerator;
pub use oracle::OracleGenerator;
pub use stitch::{StitchBackGenerator, CROP_EXPANSION, SNAP_FACTOR};
pub use triangulate::{min_weight_triangulation, LoopTriangulation, TriangulateGenerator};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::mesh::{boundary_loops, Mesh, MeshError, SeamLoop, Similarity};
use crate::region::RegionSpec;
use crate::tokenizer::{QuantizationSpec, TokenError};
use crate::Point;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("external generator: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unknown generator `{0}`; expected oracle, triangulate, stitch-back:<path> or external:<command>")]
    UnknownSpec(String),
}

/// Everything a generator may condition on.
#[derive(Clone, Debug)]
pub struct GeneratorRequest<'a> {
    /// The whole current mesh; the region's face ids index into it.
    pub mesh: &'a Mesh,
    pub region: &'a RegionSpec,
    /// Seams between target and context, in target winding.
    pub loops: Vec<SeamLoop>,
    /// Points sampled from the reference surface (may be empty).
    pub p_gt: Vec<Point>,
    /// Points sampled from the mesh with the target removed (may be empty).
    pub p_lp: Vec<Point>,
    pub quantization: QuantizationSpec,
    /// Maps mesh coordinates into the quantization domain.
    pub token_transform: Similarity,
    pub seed: u64,
}

impl<'a> GeneratorRequest<'a> {
    pub fn new(mesh: &'a Mesh, region: &'a RegionSpec, seed: u64) -> GeneratorRequest<'a> {
        GeneratorRequest {
            mesh,
            region,
            loops: boundary_loops(mesh, &region.target),
            p_gt: Vec::new(),
            p_lp: Vec::new(),
            quantization: QuantizationSpec::default(),
            token_transform: Similarity::identity(),
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PatchDiagnostics {
    pub token_count: Option<usize>,
    pub dropped_blocks: usize,
    pub warnings: Vec<String>,
}

/// Proposed replacement faces with their own vertex table.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchResult {
    pub mesh: Mesh,
    pub generator: String,
    pub diagnostics: PatchDiagnostics,
}

impl PatchResult {
    pub fn new(mesh: Mesh, generator: impl Into<String>) -> PatchResult {
        PatchResult { mesh, generator: generator.into(), diagnostics: PatchDiagnostics::default() }
    }

    pub fn empty(generator: impl Into<String>) -> PatchResult {
        PatchResult::new(Mesh::default(), generator)
    }

    pub(crate) fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.diagnostics.warnings.push(message);
    }
}

pub trait Generator: Send + Sync {
    fn id(&self) -> String;
    fn generate(&self, request: &GeneratorRequest) -> Result<PatchResult, GenerateError>;
}

/// Textual generator selector as accepted on the command line and by the
/// service.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorSpec {
    Oracle,
    Triangulate,
    StitchBack(PathBuf),
    External(String),
}

impl FromStr for GeneratorSpec {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(GeneratorSpec::Oracle),
            "triangulate" => Ok(GeneratorSpec::Triangulate),
            _ => {
                if let Some(path) = s.strip_prefix("stitch-back:").filter(|p| !p.is_empty()) {
                    Ok(GeneratorSpec::StitchBack(PathBuf::from(path)))
                } else if let Some(cmd) = s.strip_prefix("external:").filter(|c| !c.trim().is_empty()) {
                    Ok(GeneratorSpec::External(cmd.to_string()))
                } else {
                    Err(GenerateError::UnknownSpec(s.to_string()))
                }
            }
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Oracle => write!(f, "oracle"),
            GeneratorSpec::Triangulate => write!(f, "triangulate"),
            GeneratorSpec::StitchBack(p) => write!(f, "stitch-back:{}", p.display()),
            GeneratorSpec::External(c) => write!(f, "external:{c}"),
        }
    }
}

impl Serialize for GeneratorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!("oracle".parse::<GeneratorSpec>().unwrap(), GeneratorSpec::Oracle);
        assert_eq!("triangulate".parse::<GeneratorSpec>().unwrap(), GeneratorSpec::Triangulate);
        assert_eq!(
            "stitch-back:/tmp/w.obj".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::StitchBack("/tmp/w.obj".into())
        );
        let ext: GeneratorSpec = "external:python3 gen.py --x 1".parse().unwrap();
        assert_eq!(ext.to_string(), "external:python3 gen.py --x 1");
        assert!("external:".parse::<GeneratorSpec>().is_err());
        assert!("magic".parse::<GeneratorSpec>().is_err());
    }
}
