//! Detection-driven local repair: damage regions, the overflow gate with
//! weld-merge, and the multi-round loop.

mod merge;
mod regions;

pub use merge::{gate, quality_gate_merge, GateConfig, GateVerdict, MergeOutcome, WELD_TOLERANCE};
pub use regions::{extract_damage_regions, link_components, DamageGroup, CONTEXT_WIDTH, TARGET_WIDTH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{DefectDetector, DetectError};
use crate::generators::{GenerateError, Generator, GeneratorRequest, PatchResult};
use crate::mesh::{boundary_vertices, FaceAdjacencyGraph, Mesh, MeshError, Similarity};
use crate::region::{RegionMode, RegionSpec};
use crate::{FaceSet, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub rounds: usize,
    /// At most this many clustered points means a likely false positive.
    pub tau_fp: usize,
    pub w_target: usize,
    pub w_context: usize,
    /// Groups whose target would exceed this share of all faces are skipped.
    pub max_target_share: f64,
    pub gate: GateConfig,
    /// Run detection once more after the last round to learn whether the
    /// mesh ended up clean.
    pub final_check: bool,
    pub seed: u64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            rounds: 4,
            tau_fp: 2,
            w_target: TARGET_WIDTH,
            w_context: CONTEXT_WIDTH,
            max_target_share: 0.5,
            gate: GateConfig::default(),
            final_check: true,
            seed: 0,
        }
    }
}

/// Region spec for an explicit target/context pair; the seam is derived.
pub fn region_for(mesh: &Mesh, target: FaceSet, context: FaceSet, width: usize) -> RegionSpec {
    RegionSpec {
        boundary: boundary_vertices(mesh, &target),
        target,
        context,
        width,
        mode: RegionMode::Manual,
        seed: None,
        p: None,
        budget: None,
    }
}

/// Maps the mesh into the token domain: unit sphere of `frame`, halved.
pub fn token_transform(frame: &Mesh) -> Result<Similarity, MeshError> {
    Ok(Similarity::fit_unit_sphere(frame.vertices.iter())?.then_scale(0.5))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupStatus {
    Accepted,
    Rejected,
    Unusable,
    GeneratorFailed,
    Oversized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub clusters: Vec<usize>,
    pub target_faces: usize,
    pub context_faces: usize,
    pub patch_faces: usize,
    pub status: GroupStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<GateVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub clusters: usize,
    pub broken_points: usize,
    pub groups: Vec<GroupReport>,
    pub faces_before: usize,
    pub faces_after: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    NoDamage,
    LikelyFalsePositive,
    MaxRounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub v: u32,
    pub rounds: Vec<RoundReport>,
    pub exit: ExitReason,
    /// The first detection found clustered points.
    pub initially_damaged: bool,
    /// The last detection found no clustered points at all.
    pub repaired: bool,
    /// Round after which detection first came back clean.
    pub fixed_in_round: Option<usize>,
    /// Clustered points of the check after the last round, if one ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_points: Option<usize>,
}

impl RepairReport {
    pub fn rejections(&self) -> usize {
        self.rounds
            .iter()
            .flat_map(|r| &r.groups)
            .filter(|g| g.status == GroupStatus::Rejected)
            .count()
    }
}

/// Generates a patch for one region and runs it through the gate.
pub fn edit_region(
    mesh: &Mesh,
    region: &RegionSpec,
    generator: &dyn Generator,
    transform: Similarity,
    gate_cfg: &GateConfig,
    seed: u64,
) -> Result<(PatchResult, MergeOutcome), RepairError> {
    let mut req = GeneratorRequest::new(mesh, region, seed);
    req.token_transform = transform;
    let patch = generator.generate(&req)?;
    let outcome = quality_gate_merge(mesh, &region.target, &region.context, &patch.mesh, gate_cfg)?;
    Ok((patch, outcome))
}

/// Surviving ids after removing `removed` from a mesh with `n` faces.
fn shift_ids(ids: &mut [Option<usize>], removed: &FaceSet) {
    for id in ids.iter_mut() {
        if let Some(f) = *id {
            *id = if removed.contains(&f) { None } else { Some(f - removed.range(..f).count()) };
        }
    }
}

/// Detect, extract, regenerate and merge, for up to `cfg.rounds` rounds.
/// `mesh` and `reference` must share a coordinate frame.
pub fn iterative_repair(
    mesh: &Mesh,
    reference: &Mesh,
    generator: &dyn Generator,
    detector: &dyn DefectDetector,
    cfg: &RepairConfig,
) -> Result<(Mesh, RepairReport), RepairError> {
    let transform = token_transform(reference)?;
    let mut current = mesh.clone();
    let mut rounds = Vec::new();
    let mut exit = ExitReason::MaxRounds;
    let mut first_points = None;
    let mut last_points = None;
    let mut final_points = None;
    for round in 1..=cfg.rounds {
        let det = detector.detect(&current, reference)?;
        let points = det.clustered_point_count();
        first_points.get_or_insert(points);
        last_points = Some(points);
        if points == 0 {
            exit = ExitReason::NoDamage;
            break;
        }
        if points <= cfg.tau_fp {
            exit = ExitReason::LikelyFalsePositive;
            break;
        }
        let clusters: Vec<Vec<_>> = (0..det.clusters.len()).map(|k| det.cluster_points(k)).collect();
        let graph = FaceAdjacencyGraph::build(&current);
        let groups = extract_damage_regions(&current, &graph, &clusters, cfg.w_target, cfg.w_context)?;
        let faces_before = current.faces.len();
        let mut ids: Vec<Option<usize>> = (0..faces_before).map(Some).collect();
        let mut reports = Vec::new();
        let mut changed = false;
        for (j, group) in groups.iter().enumerate() {
            let remap = |set: &FaceSet| -> FaceSet { set.iter().filter_map(|&f| ids[f]).collect() };
            let (target, context) = (remap(&group.target), remap(&group.context));
            let mut report = GroupReport {
                clusters: group.clusters.clone(),
                target_faces: target.len(),
                context_faces: context.len(),
                patch_faces: 0,
                status: GroupStatus::Oversized,
                verdict: None,
                message: None,
            };
            if target.len() as f64 > cfg.max_target_share * current.faces.len() as f64 {
                log::warn!("skipping a damage group covering {} of {} faces", target.len(), current.faces.len());
                reports.push(report);
                continue;
            }
            let region = region_for(&current, target, context, cfg.w_context);
            let seed = cfg.seed.wrapping_add((round * 1000 + j) as u64);
            let gate_cfg = GateConfig { seed, ..cfg.gate.clone() };
            match edit_region(&current, &region, generator, transform, &gate_cfg, seed) {
                Err(RepairError::Generate(e)) => {
                    log::warn!("generator failed on group {j}: {e}");
                    report.status = GroupStatus::GeneratorFailed;
                    report.message = Some(e.to_string());
                }
                Err(e) => return Err(e),
                Ok((patch, outcome)) => {
                    report.patch_faces = patch.mesh.faces.len();
                    report.verdict = outcome.verdict().cloned();
                    match outcome {
                        MergeOutcome::Merged { mesh, .. } => {
                            report.status = GroupStatus::Accepted;
                            shift_ids(&mut ids, &region.target);
                            current = mesh;
                            changed = true;
                        }
                        MergeOutcome::Rejected { .. } => report.status = GroupStatus::Rejected,
                        MergeOutcome::Unusable { reason } => {
                            report.status = GroupStatus::Unusable;
                            report.message = Some(reason);
                        }
                    }
                }
            }
            reports.push(report);
        }
        if changed {
            current = current.compacted().0;
        }
        rounds.push(RoundReport {
            round,
            clusters: det.clusters.len(),
            broken_points: points,
            groups: reports,
            faces_before,
            faces_after: current.faces.len(),
        });
    }
    if exit == ExitReason::MaxRounds && cfg.final_check && cfg.rounds > 0 {
        let points = detector.detect(&current, reference)?.clustered_point_count();
        final_points = Some(points);
        last_points = Some(points);
    }
    let repaired = last_points == Some(0);
    let initially_damaged = first_points.is_some_and(|p| p > 0);
    let fixed_in_round = (initially_damaged && repaired).then_some(rounds.len());
    let report = RepairReport {
        v: SCHEMA_VERSION,
        rounds,
        exit,
        initially_damaged,
        repaired,
        fixed_in_round,
        final_points,
    };
    Ok((current, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub newly_fixed: usize,
    pub cumulative_fixed: usize,
    /// Cumulative fixed as a fraction of the initially damaged meshes.
    pub cumulative_share: f64,
}

/// Batch summary of many repair runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairStats {
    pub v: u32,
    pub total: usize,
    pub initially_damaged: usize,
    pub never_damaged: usize,
    pub repaired: usize,
    pub still_broken: usize,
    pub per_round: Vec<RoundStats>,
}

impl RepairStats {
    pub fn from_reports(reports: &[RepairReport], rounds: usize) -> RepairStats {
        let damaged = reports.iter().filter(|r| r.initially_damaged).count();
        let repaired = reports.iter().filter(|r| r.initially_damaged && r.repaired).count();
        let mut cumulative = 0;
        let per_round = (1..=rounds)
            .map(|round| {
                let newly = reports.iter().filter(|r| r.fixed_in_round == Some(round)).count();
                cumulative += newly;
                RoundStats {
                    round,
                    newly_fixed: newly,
                    cumulative_fixed: cumulative,
                    cumulative_share: if damaged == 0 { 0.0 } else { cumulative as f64 / damaged as f64 },
                }
            })
            .collect();
        RepairStats {
            v: SCHEMA_VERSION,
            total: reports.len(),
            initially_damaged: damaged,
            never_damaged: reports.len() - damaged,
            repaired,
            still_broken: damaged - repaired,
            per_round,
        }
    }
}
