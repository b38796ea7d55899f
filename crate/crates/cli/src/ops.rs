//! Operations shared by the command line and the service, so both produce
//! the same documents for the same inputs.

use std::path::{Path, PathBuf};

use meshfim_core::detect::{DefectDetector, DetectConfig, MultiViewDetector};
use meshfim_core::gate::{gate_dump, GateDump, GateParams, LocalStatsEncoder};
use meshfim_core::generators::{
    ExternalGenerator, Generator, GeneratorSpec, OracleGenerator, PatchDiagnostics, StitchBackGenerator,
    TriangulateGenerator,
};
use meshfim_core::mesh::{
    largest_connected_component, load_obj, normalize_jointly, sample_points, write_obj, FaceAdjacencyGraph, Mesh,
};
use meshfim_core::metrics::{evaluate_batch, evaluate_sample, EvalConfig, MetricsReport, SampleEval, SampleInput};
use meshfim_core::region::{extract_context, RegionError, RegionSpec};
use meshfim_core::repair::{
    edit_region, iterative_repair, token_transform, GateConfig, GateVerdict, MergeOutcome, RepairConfig, RepairReport,
};
use meshfim_core::tokenizer::{augment_context, serialize_fim, FimSequence, QuantizationSpec};
use meshfim_core::{FaceSet, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    load_obj(path).map_err(|source| CliError::Mesh { path: path.to_path_buf(), source })
}

pub fn read_region(path: &Path, mesh: &Mesh) -> Result<RegionSpec, CliError> {
    let text = read_text(path)?;
    Ok(RegionSpec::from_json(&text, mesh, &FaceAdjacencyGraph::build(mesh))?)
}

/// Hex SHA-256 of the mesh's OBJ text, so equal meshes share a hash however
/// they were formatted on upload.
pub fn mesh_hash(mesh: &Mesh) -> String {
    hex::encode(Sha256::digest(write_obj(mesh).as_bytes()))
}

pub fn build_generator(spec: &GeneratorSpec, reference: Option<&Mesh>) -> Result<Box<dyn Generator>, CliError> {
    Ok(match spec {
        GeneratorSpec::Oracle => match reference {
            Some(r) => Box::new(OracleGenerator::with_reference(r.clone())),
            None => Box::new(OracleGenerator::default()),
        },
        GeneratorSpec::Triangulate => Box::new(TriangulateGenerator),
        GeneratorSpec::StitchBack(path) => Box::new(StitchBackGenerator::load(path)?),
        GeneratorSpec::External(cmd) => Box::new(ExternalGenerator::new(cmd.clone())),
    })
}

/// Brush strokes reduced to one connected target.
#[derive(Clone, Debug)]
pub struct Selection {
    pub region: RegionSpec,
    /// Indices of strokes left out because they did not touch the selection.
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Each stroke keeps its largest connected piece. The first non-empty stroke
/// starts the selection; later ones join only when they overlap it or share
/// an edge with it.
pub fn select_strokes(mesh: &Mesh, strokes: &[Vec<usize>], width: usize) -> Result<Selection, RegionError> {
    let graph = FaceAdjacencyGraph::build(mesh);
    let mut selected = FaceSet::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for (k, stroke) in strokes.iter().enumerate() {
        if let Some(&f) = stroke.iter().find(|&&f| f >= mesh.faces.len()) {
            return Err(RegionError::FaceOutOfRange(f));
        }
        let faces: FaceSet = stroke.iter().copied().collect();
        let piece = largest_connected_component(&graph, &faces);
        if piece.len() < faces.len() {
            warnings.push(format!("stroke {k}: kept the largest connected piece, {} of {} faces", piece.len(), faces.len()));
        }
        if piece.is_empty() {
            continue;
        }
        let touches = selected.is_empty()
            || piece.iter().any(|&f| selected.contains(&f) || graph.neighbors(f).iter().any(|g| selected.contains(g)));
        if touches {
            selected.extend(piece);
        } else {
            warnings.push(format!("stroke {k} does not touch the selection and was left out"));
            excluded.push(k);
        }
    }
    if selected.is_empty() {
        return Err(RegionError::Invalid("no faces selected".into()));
    }
    let region = extract_context(mesh, &graph, &selected, width)?;
    Ok(Selection { region, excluded, warnings })
}

/// Region document returned by the service and by `sample-region --preview`.
pub fn region_document(region: &RegionSpec, excluded: &[usize], warnings: &[String]) -> Value {
    json!({
        "v": SCHEMA_VERSION,
        "region": region.to_json_value(),
        "context_faces": region.context,
        "boundary": region.boundary,
        "excluded_strokes": excluded,
        "warnings": warnings,
    })
}

/// Scales into the token domain unless `raw`, optionally jitters the
/// context, and serializes.
pub fn serialize_region(
    mesh: &Mesh,
    region: &RegionSpec,
    bins: u32,
    augment: Option<f64>,
    seed: u64,
    raw: bool,
) -> Result<FimSequence, CliError> {
    let mut m = if raw { mesh.clone() } else { token_transform(mesh)?.apply_mesh(mesh) };
    if let Some(delta) = augment {
        m = augment_context(&m, &region.context, delta, seed);
    }
    Ok(serialize_fim(&m, &region.context, &region.target, &region.boundary, &QuantizationSpec::with_bins(bins))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EditStatus {
    Accepted,
    Rejected,
    Unusable,
}

#[derive(Clone, Debug, Serialize)]
pub struct EditReport {
    pub v: u32,
    pub generator: String,
    pub status: EditStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<GateVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub target_faces: usize,
    pub context_faces: usize,
    pub patch_faces: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub welded: Option<usize>,
    pub metrics: SampleEval,
    pub diagnostics: PatchDiagnostics,
}

pub struct EditResult {
    pub report: EditReport,
    pub patch: Mesh,
    /// The repaired mesh, compacted, when the gate accepted the patch.
    pub merged: Option<Mesh>,
}

/// Regenerates one region, gates the patch and scores it against
/// `reference` (the mesh itself when there is none).
pub fn edit(
    mesh: &Mesh,
    region: &RegionSpec,
    spec: &GeneratorSpec,
    reference: Option<&Mesh>,
    seed: u64,
) -> Result<EditResult, CliError> {
    let frame = reference.unwrap_or(mesh);
    let generator = build_generator(spec, reference)?;
    let gate_cfg = GateConfig { seed, ..Default::default() };
    let (patch, outcome) = edit_region(mesh, region, generator.as_ref(), token_transform(frame)?, &gate_cfg, seed)?;
    let input = SampleInput::from_region(frame, mesh, region, &patch.mesh);
    let metrics = evaluate_sample(&input, &EvalConfig { seed, ..Default::default() })?;
    let (status, reason, welded, merged) = match outcome {
        MergeOutcome::Merged { mesh: ref m, welded, .. } => (EditStatus::Accepted, None, Some(welded), Some(m.compacted().0)),
        MergeOutcome::Rejected { .. } => (EditStatus::Rejected, None, None, None),
        MergeOutcome::Unusable { ref reason } => (EditStatus::Unusable, Some(reason.clone()), None, None),
    };
    let report = EditReport {
        v: SCHEMA_VERSION,
        generator: patch.generator.clone(),
        status,
        verdict: outcome.verdict().cloned(),
        reason,
        target_faces: region.target.len(),
        context_faces: region.context.len(),
        patch_faces: patch.mesh.faces.len(),
        welded,
        metrics,
        diagnostics: patch.diagnostics.clone(),
    };
    Ok(EditResult { report, patch: patch.mesh, merged })
}

pub fn repair(
    mesh: &Mesh,
    reference: &Mesh,
    spec: &GeneratorSpec,
    cfg: &RepairConfig,
    detect: DetectConfig,
) -> Result<(Mesh, RepairReport), CliError> {
    let generator = build_generator(spec, Some(reference))?;
    let detector = MultiViewDetector::new(detect);
    Ok(iterative_repair(mesh, reference, generator.as_ref(), &detector, cfg)?)
}

pub fn detect(mesh: &Mesh, reference: &Mesh, cfg: DetectConfig) -> Result<meshfim_core::detect::Detection, CliError> {
    Ok(MultiViewDetector::new(cfg).detect(mesh, reference)?)
}

#[derive(Clone, Debug)]
pub struct GateVisOptions {
    pub queries: usize,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for GateVisOptions {
    fn default() -> Self {
        GateVisOptions {
            queries: meshfim_core::gate::DEFAULT_QUERY_COUNT,
            radius: meshfim_core::gate::DEFAULT_RADIUS,
            samples: 4096,
            seed: 0,
        }
    }
}

/// Gate values for `mesh` (minus `target`) against `reference`, both scaled
/// into the reference's unit sphere.
pub fn gate_visual(
    reference: &Mesh,
    mesh: &Mesh,
    target: Option<&FaceSet>,
    params: &GateParams,
    opts: &GateVisOptions,
) -> Result<GateDump, CliError> {
    let existing = match target {
        Some(t) => mesh.without_faces(t),
        None => mesh.clone(),
    };
    let (lp, gt, _) = normalize_jointly(&existing, reference)?;
    let p_gt = sample_points(&gt, opts.samples, opts.seed)?.positions;
    let p_lp = if lp.faces.is_empty() { Vec::new() } else { sample_points(&lp, opts.samples, opts.seed.wrapping_add(1))?.positions };
    let encoder = LocalStatsEncoder { radius: opts.radius, d: params.d };
    Ok(gate_dump(&p_gt, &p_lp, params, &encoder, opts.queries, opts.seed)?)
}

/// One evaluation case on disk; paths are relative to the manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub gt: PathBuf,
    pub context: PathBuf,
    pub target: PathBuf,
    pub patch: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub pairs: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalDocument {
    #[serde(flatten)]
    pub report: MetricsReport,
    pub per_sample: Vec<SampleEval>,
}

pub fn evaluate_manifest(path: &Path, cfg: &EvalConfig) -> Result<EvalDocument, CliError> {
    let text = read_text(path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    if manifest.v != SCHEMA_VERSION {
        return Err(CliError::Usage(format!("{}: unsupported manifest version {}", path.display(), manifest.v)));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let inputs = manifest
        .pairs
        .iter()
        .map(|e| {
            let load = |p: &PathBuf| read_mesh(&base.join(p));
            Ok(SampleInput::from_parts(&load(&e.gt)?, &load(&e.context)?, &load(&e.target)?, &load(&e.patch)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (per_sample, report) = evaluate_batch(&inputs, cfg)?;
    Ok(EvalDocument { report, per_sample })
}
