//! Patch evaluation: boundary matching, one-way Chamfer distance, face-count
//! change and overflow, plus their batch aggregates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{sample_points, Mesh, MeshError};
use crate::region::RegionSpec;
use crate::spatial::{NnIndex, TriangleBvh};
use crate::{Point, SCHEMA_VERSION};

/// Boundary vertices closer than this count as matched.
pub const MATCH_TOLERANCE: f64 = 1e-6;
pub const GT_SAMPLES: usize = 100_000;
pub const PATCH_SAMPLES: usize = 20_000;
/// Distance under which a patch sample counts as touching the residual mesh.
pub const OVERFLOW_EPS: f64 = 1.0 / 256.0;
/// Overflow ratio above which a sample counts as overflowing.
pub const OVERFLOW_THETA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("cannot sample the {0}: it has no area")]
    Unsampleable(&'static str),
}

/// Fraction of `boundary` points with a patch vertex within `tau`. An empty
/// boundary has nothing to miss and scores 1.
pub fn vertex_matching_ratio(boundary: &[Point], patch_vertices: &[Point], tau: f64) -> f64 {
    if boundary.is_empty() {
        return 1.0;
    }
    let index = NnIndex::new(patch_vertices.to_vec());
    let matched = boundary
        .iter()
        .filter(|p| index.nearest(p).is_some_and(|(_, d)| d <= tau))
        .count();
    matched as f64 / boundary.len() as f64
}

/// Mean distance from each point of `from` to its nearest point in `to`.
pub fn one_way_chamfer(from: &[Point], to: &[Point]) -> Option<f64> {
    if from.is_empty() || to.is_empty() {
        return None;
    }
    let index = NnIndex::new(to.to_vec());
    let sum: f64 = from.iter().map(|p| index.nearest(p).expect("non-empty").1).sum();
    Some(sum / from.len() as f64)
}

/// Fraction of `points` within `eps` of any face of `residual`.
pub fn overflow_ratio(points: &[Point], residual: &Mesh, eps: f64) -> f64 {
    if points.is_empty() || residual.faces.is_empty() {
        return 0.0;
    }
    let bvh = TriangleBvh::new(residual);
    let near = points.iter().filter(|p| bvh.any_within(p, eps)).count();
    near as f64 / points.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub gt_samples: usize,
    pub patch_samples: usize,
    pub tau: f64,
    pub eps_ovf: f64,
    pub theta_ovf: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            gt_samples: GT_SAMPLES,
            patch_samples: PATCH_SAMPLES,
            tau: MATCH_TOLERANCE,
            eps_ovf: OVERFLOW_EPS,
            theta_ovf: OVERFLOW_THETA,
            seed: 0,
        }
    }
}

/// One evaluation case. `target` is the original region B, `patch` its
/// replacement B', `residual` everything outside target and context.
#[derive(Clone, Debug)]
pub struct SampleInput {
    pub gt: Mesh,
    pub target: Mesh,
    pub patch: Mesh,
    pub residual: Mesh,
    /// Exposed boundary vertices, the seam between target and context.
    pub boundary: Vec<Point>,
}

type CornerKey = Vec<[u64; 3]>;

fn corner_key(mesh: &Mesh, f: usize) -> CornerKey {
    let mut k: CornerKey = mesh.face_points(f).map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
    k.sort_unstable();
    k
}

fn position_key(p: &Point) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

impl SampleInput {
    /// Cuts target, context and residual out of `mesh` by face id.
    pub fn from_region(gt: &Mesh, mesh: &Mesh, region: &RegionSpec, patch: &Mesh) -> SampleInput {
        SampleInput {
            gt: gt.clone(),
            target: mesh.submesh(&region.target),
            patch: patch.clone(),
            residual: mesh.submesh(&region.residual(mesh)),
            boundary: region.boundary.iter().map(|&v| mesh.vertices[v]).collect(),
        }
    }

    /// Builds a case from separate files. The seam is every target vertex at
    /// the exact position of a context vertex. The residual is every face of
    /// `gt` whose corners do not coincide with a context or target face, so
    /// `gt` must be the mesh the two were cut from.
    pub fn from_parts(gt: &Mesh, context: &Mesh, target: &Mesh, patch: &Mesh) -> SampleInput {
        let used: HashSet<[u64; 3]> = context
            .referenced_vertices()
            .iter()
            .enumerate()
            .filter(|(_, &u)| u)
            .map(|(v, _)| position_key(&context.vertices[v]))
            .collect();
        let mut seen = HashSet::new();
        let boundary = target
            .vertices_of(&(0..target.faces.len()).collect::<Vec<_>>())
            .into_iter()
            .map(|v| target.vertices[v])
            .filter(|p| used.contains(&position_key(p)) && seen.insert(position_key(p)))
            .collect();
        let cut: HashSet<CornerKey> = (0..context.faces.len())
            .map(|f| corner_key(context, f))
            .chain((0..target.faces.len()).map(|f| corner_key(target, f)))
            .collect();
        let keep: Vec<usize> = (0..gt.faces.len()).filter(|&f| !cut.contains(&corner_key(gt, f))).collect();
        SampleInput { gt: gt.clone(), target: target.clone(), patch: patch.clone(), residual: gt.submesh(&keep), boundary }
    }
}

/// Per-case scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub r: f64,
    /// CD(B -> G); `None` when B has no area.
    pub cd_target: Option<f64>,
    /// CD(B' -> G); `None` when B' has no area.
    pub cd_patch: Option<f64>,
    pub faces_target: usize,
    pub faces_patch: usize,
    /// Fraction of B' samples within `eps_ovf` of the residual mesh.
    pub overflow: f64,
    pub warnings: Vec<String>,
}

fn try_sample(mesh: &Mesh, n: usize, seed: u64) -> Option<Vec<Point>> {
    sample_points(mesh, n, seed).ok().map(|s| s.positions)
}

/// Scores one case. B and B' share a sampling seed, so identical patches get
/// identical point sets.
pub fn evaluate_sample(input: &SampleInput, cfg: &EvalConfig) -> Result<SampleEval, MetricsError> {
    let mut warnings = Vec::new();
    let gt = try_sample(&input.gt, cfg.gt_samples, cfg.seed).ok_or(MetricsError::Unsampleable("ground truth"))?;
    let patch_seed = cfg.seed.wrapping_add(1);
    let b = try_sample(&input.target, cfg.patch_samples, patch_seed);
    let bp = try_sample(&input.patch, cfg.patch_samples, patch_seed);
    if b.is_none() {
        warnings.push("target has no area".to_string());
    }
    if bp.is_none() {
        warnings.push("patch has no area".to_string());
    }
    let cd = |pts: &Option<Vec<Point>>| pts.as_ref().and_then(|p| one_way_chamfer(p, &gt));
    let overflow = bp.as_ref().map_or(0.0, |p| overflow_ratio(p, &input.residual, cfg.eps_ovf));
    Ok(SampleEval {
        r: vertex_matching_ratio(&input.boundary, &input.patch.vertices, cfg.tau),
        cd_target: cd(&b),
        cd_patch: cd(&bp),
        faces_target: input.target.faces.len(),
        faces_patch: input.patch.faces.len(),
        overflow,
        warnings,
    })
}

/// An aggregate, or why it could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Aggregate {
    Value(f64),
    Undefined { undefined: String },
}

impl Aggregate {
    fn mean(values: &[f64], why_empty: &str) -> Aggregate {
        if values.is_empty() {
            Aggregate::Undefined { undefined: why_empty.to_string() }
        } else {
            Aggregate::Value(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Aggregate::Value(v) => Some(*v),
            Aggregate::Undefined { .. } => None,
        }
    }
}

/// Overflow scores of the unedited targets: the smallest values any patch
/// can honestly reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoEditFloor {
    pub ovr: Aggregate,
    pub a_overflow: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub v: u32,
    pub samples: usize,
    /// Size of the perfect-match subset.
    pub perfect_matches: usize,
    pub pmr: Aggregate,
    pub a_vmr: Aggregate,
    pub o_cdir: Aggregate,
    pub f_inc: Aggregate,
    pub cd_pr: Aggregate,
    pub ovr: Aggregate,
    pub a_overflow: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_edit: Option<NoEditFloor>,
    pub warnings: Vec<String>,
}

fn overflow_aggregates(evals: &[SampleEval], theta: f64) -> (Aggregate, Aggregate) {
    let n = evals.len();
    let over: Vec<f64> = evals.iter().map(|e| e.overflow).filter(|&o| o > theta).collect();
    let ovr = if n == 0 {
        Aggregate::Undefined { undefined: "no samples".into() }
    } else {
        Aggregate::Value(over.len() as f64 / n as f64)
    };
    (ovr, Aggregate::mean(&over, "no sample overflows"))
}

/// Batch aggregates. Ratios are fractions in [0, 1]; O-CDIR and #F-Inc only
/// use the perfect-match subset.
pub fn aggregate(evals: &[SampleEval], theta_ovf: f64) -> MetricsReport {
    let n = evals.len();
    let mut warnings = Vec::new();
    let indicator = |pred: &dyn Fn(&SampleEval) -> bool| -> Aggregate {
        let hits: Vec<f64> = evals.iter().map(|e| if pred(e) { 1.0 } else { 0.0 }).collect();
        Aggregate::mean(&hits, "no samples")
    };
    let perfect: Vec<&SampleEval> = evals.iter().filter(|e| e.r == 1.0).collect();
    let mut cdir = Vec::new();
    let mut finc = Vec::new();
    for (k, e) in perfect.iter().enumerate() {
        match (e.cd_target, e.cd_patch) {
            (Some(b), Some(bp)) if b > 0.0 => cdir.push((b - bp) / b),
            _ => warnings.push(format!("perfect-match sample {k} has no usable Chamfer pair; left out of O-CDIR")),
        }
        if e.faces_target > 0 {
            finc.push((e.faces_patch as f64 - e.faces_target as f64) / e.faces_target as f64);
        } else {
            warnings.push(format!("perfect-match sample {k} has an empty target; left out of #F-Inc"));
        }
    }
    let (ovr, a_overflow) = overflow_aggregates(evals, theta_ovf);
    MetricsReport {
        v: SCHEMA_VERSION,
        samples: n,
        perfect_matches: perfect.len(),
        pmr: indicator(&|e| e.r == 1.0),
        a_vmr: Aggregate::mean(&evals.iter().map(|e| e.r).collect::<Vec<_>>(), "no samples"),
        o_cdir: Aggregate::mean(&cdir, "perfect-match subset is empty"),
        f_inc: Aggregate::mean(&finc, "perfect-match subset is empty"),
        cd_pr: indicator(&|e| matches!((e.cd_patch, e.cd_target), (Some(bp), Some(b)) if bp < b)),
        ovr,
        a_overflow,
        no_edit: None,
        warnings,
    }
}

/// Re-scores every case with its own target standing in for the patch.
pub fn no_edit_reference(inputs: &[SampleInput], cfg: &EvalConfig) -> Result<NoEditFloor, MetricsError> {
    let evals = inputs
        .iter()
        .map(|s| {
            let unedited = SampleInput { patch: s.target.clone(), ..s.clone() };
            evaluate_sample(&unedited, cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (ovr, a_overflow) = overflow_aggregates(&evals, cfg.theta_ovf);
    Ok(NoEditFloor { ovr, a_overflow })
}

/// Attaches the floor and warns about any overflow score below it, which can
/// only come from the evaluation itself.
pub fn apply_floor(report: &mut MetricsReport, floor: NoEditFloor) {
    for (name, got, min) in [("OvR", &report.ovr, &floor.ovr), ("A-Overflow", &report.a_overflow, &floor.a_overflow)] {
        if let (Some(g), Some(m)) = (got.value(), min.value()) {
            if g < m {
                let msg = format!("{name} {g:.4} is below the no-edit floor {m:.4}; this points to an evaluation artifact");
                log::warn!("{msg}");
                report.warnings.push(msg);
            }
        }
    }
    report.no_edit = Some(floor);
}

/// Scores a batch end to end: per-case evals, aggregates and the no-edit floor.
pub fn evaluate_batch(inputs: &[SampleInput], cfg: &EvalConfig) -> Result<(Vec<SampleEval>, MetricsReport), MetricsError> {
    let evals = inputs
        .iter()
        .enumerate()
        .map(|(k, s)| evaluate_sample(s, &EvalConfig { seed: cfg.seed.wrapping_add(1000 * k as u64), ..cfg.clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = aggregate(&evals, cfg.theta_ovf);
    let floor = no_edit_reference(inputs, cfg)?;
    apply_floor(&mut report, floor);
    for (k, e) in evals.iter().enumerate() {
        report.warnings.extend(e.warnings.iter().map(|w| format!("sample {k}: {w}")));
    }
    Ok((evals, report))
}
