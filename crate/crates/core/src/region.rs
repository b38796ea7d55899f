//! Target-region sampling and context extraction.

use std::collections::HashMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{bfs_rings, boundary_vertices, connected_components, FaceAdjacencyGraph, Mesh, MeshError};
use crate::{FaceSet, VertexSet, SCHEMA_VERSION};

/// Default face budget for sampled regions.
pub const DEFAULT_BUDGET: usize = 1200;
/// Default number of context rings around a target.
pub const DEFAULT_CONTEXT_WIDTH: usize = 3;
/// Share of percolation regions in the training mix.
pub const PERCOLATION_SHARE: f64 = 0.3;
/// Range of the percolation acceptance probability in the training mix.
pub const PERCOLATION_P: (f64, f64) = (0.55, 0.85);

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("target is not connected: {} components {components:?}", components.len())]
    Disconnected { components: Vec<Vec<usize>> },
    #[error("face id {0} out of range")]
    FaceOutOfRange(usize),
    #[error("acceptance probability must be in (0, 1], got {0}")]
    BadProbability(f64),
    #[error("budget must be at least 1")]
    BadBudget,
    #[error("invalid region: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<MeshError> for RegionError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::FaceOutOfRange(f) => RegionError::FaceOutOfRange(f),
            other => RegionError::Invalid(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    Bfs,
    Percolation,
    Manual,
}

/// A connected target `B`, its context rings and the exposed seam.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSpec {
    pub target: FaceSet,
    pub context: FaceSet,
    pub width: usize,
    pub boundary: VertexSet,
    pub mode: RegionMode,
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub budget: Option<usize>,
}

/// On-disk form: derived sets are recomputed on load, never trusted.
#[derive(Debug, Serialize, Deserialize)]
struct RegionRecord {
    v: u32,
    target_faces: Vec<usize>,
    context_width: usize,
    mode: RegionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<usize>,
}

impl RegionSpec {
    /// Serializes the non-derived fields.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("region serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_record()).expect("region serializes")
    }

    fn to_record(&self) -> RegionRecord {
        RegionRecord {
            v: SCHEMA_VERSION,
            target_faces: self.target.iter().copied().collect(),
            context_width: self.width,
            mode: self.mode,
            seed: self.seed,
            p: self.p,
            budget: self.budget,
        }
    }

    /// Parses a region document and rebuilds context and seam against `mesh`.
    pub fn from_json(text: &str, mesh: &Mesh, graph: &FaceAdjacencyGraph) -> Result<RegionSpec, RegionError> {
        let record: RegionRecord = serde_json::from_str(text)?;
        if record.v != SCHEMA_VERSION {
            return Err(RegionError::Invalid(format!("unsupported region version {}", record.v)));
        }
        let target: FaceSet = record.target_faces.iter().copied().collect();
        let mut spec = extract_context(mesh, graph, &target, record.context_width)?;
        spec.mode = record.mode;
        spec.seed = record.seed;
        spec.p = record.p;
        spec.budget = record.budget;
        spec.validate(mesh, graph)?;
        Ok(spec)
    }

    /// Checks every structural invariant against the mesh.
    pub fn validate(&self, mesh: &Mesh, graph: &FaceAdjacencyGraph) -> Result<(), RegionError> {
        if let Some(&f) = self.target.iter().chain(&self.context).find(|&&f| f >= mesh.faces.len()) {
            return Err(RegionError::FaceOutOfRange(f));
        }
        check_connected(graph, &self.target)?;
        if let Some(f) = self.target.intersection(&self.context).next() {
            return Err(RegionError::Invalid(format!("face {f} is both target and context")));
        }
        if self.context != context_rings(graph, &self.target, self.width)? {
            return Err(RegionError::Invalid("context does not match the target's rings".into()));
        }
        if self.boundary != boundary_vertices(mesh, &self.target) {
            return Err(RegionError::Invalid("boundary does not match the target's seam".into()));
        }
        if let Some(b) = self.budget {
            if self.target.len() > b {
                return Err(RegionError::Invalid(format!("target has {} faces, budget is {b}", self.target.len())));
            }
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(RegionError::BadProbability(p));
            }
        }
        Ok(())
    }

    /// Faces outside both the target and its context.
    pub fn residual(&self, mesh: &Mesh) -> FaceSet {
        (0..mesh.faces.len()).filter(|f| !self.target.contains(f) && !self.context.contains(f)).collect()
    }
}

fn check_connected(graph: &FaceAdjacencyGraph, target: &FaceSet) -> Result<(), RegionError> {
    let comps = connected_components(graph, target);
    if comps.len() > 1 {
        return Err(RegionError::Disconnected {
            components: comps.into_iter().map(|c| c.into_iter().collect()).collect(),
        });
    }
    Ok(())
}

fn context_rings(graph: &FaceAdjacencyGraph, target: &FaceSet, w: usize) -> Result<FaceSet, RegionError> {
    if target.is_empty() {
        return Ok(FaceSet::new());
    }
    Ok(bfs_rings(graph, target, w, false)?)
}

/// Context of `target`: faces within `w` rings of it, target excluded.
pub fn extract_context(
    mesh: &Mesh,
    graph: &FaceAdjacencyGraph,
    target: &FaceSet,
    w: usize,
) -> Result<RegionSpec, RegionError> {
    if let Some(&f) = target.iter().find(|&&f| f >= mesh.faces.len()) {
        return Err(RegionError::FaceOutOfRange(f));
    }
    check_connected(graph, target)?;
    if !mesh.faces.is_empty() && target.len() == mesh.faces.len() {
        warn!("target covers the whole mesh; context is empty");
    }
    Ok(RegionSpec {
        context: context_rings(graph, target, w)?,
        boundary: boundary_vertices(mesh, target),
        target: target.clone(),
        width: w,
        mode: RegionMode::Manual,
        seed: None,
        p: None,
        budget: None,
    })
}

fn check_seed(graph: &FaceAdjacencyGraph, seed_face: usize, budget: usize) -> Result<(), RegionError> {
    if seed_face >= graph.face_count() {
        return Err(RegionError::FaceOutOfRange(seed_face));
    }
    if budget == 0 {
        return Err(RegionError::BadBudget);
    }
    Ok(())
}

/// Faces adjacent to `region` but not in it, ascending.
fn frontier(graph: &FaceAdjacencyGraph, region: &FaceSet) -> Vec<usize> {
    let f: FaceSet = region
        .iter()
        .flat_map(|&f| graph.neighbors(f).iter().copied())
        .filter(|g| !region.contains(g))
        .collect();
    f.into_iter().collect()
}

/// Whole BFS rings from `seed_face` while they fit, then the lowest-id faces
/// of the first ring that does not.
pub fn grow_bfs(graph: &FaceAdjacencyGraph, seed_face: usize, budget: usize) -> Result<FaceSet, RegionError> {
    grow_percolation(graph, seed_face, 1.0, budget, 0)
}

/// Stochastic frontier growth. Each round snapshots the frontier and accepts
/// its faces in ascending id order with probability `p` each; a round that
/// accepts nothing force-accepts the lowest-id frontier face.
pub fn grow_percolation(
    graph: &FaceAdjacencyGraph,
    seed_face: usize,
    p: f64,
    budget: usize,
    seed: u64,
) -> Result<FaceSet, RegionError> {
    check_seed(graph, seed_face, budget)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(RegionError::BadProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut region = FaceSet::from([seed_face]);
    while region.len() < budget {
        let front = frontier(graph, &region);
        if front.is_empty() {
            break;
        }
        let mut accepted = 0;
        for &f in &front {
            if region.len() >= budget {
                break;
            }
            if p >= 1.0 || rng.random::<f64>() < p {
                region.insert(f);
                accepted += 1;
            }
        }
        if accepted == 0 {
            region.insert(front[0]);
        }
    }
    Ok(region)
}

pub fn sample_bfs_region(
    mesh: &Mesh,
    graph: &FaceAdjacencyGraph,
    seed_face: usize,
    budget: usize,
    w: usize,
) -> Result<RegionSpec, RegionError> {
    let target = grow_bfs(graph, seed_face, budget)?;
    let mut spec = extract_context(mesh, graph, &target, w)?;
    spec.mode = RegionMode::Bfs;
    spec.budget = Some(budget);
    Ok(spec)
}

pub fn sample_percolation_region(
    mesh: &Mesh,
    graph: &FaceAdjacencyGraph,
    seed_face: usize,
    p: f64,
    budget: usize,
    seed: u64,
    w: usize,
) -> Result<RegionSpec, RegionError> {
    let target = grow_percolation(graph, seed_face, p, budget, seed)?;
    let mut spec = extract_context(mesh, graph, &target, w)?;
    spec.mode = RegionMode::Percolation;
    spec.budget = Some(budget);
    spec.seed = Some(seed);
    spec.p = Some(p);
    Ok(spec)
}

/// One draw from the training-time region mix: a uniformly random seed face,
/// then percolation growth with `p ~ U(0.55, 0.85)` for 30% of draws and BFS
/// growth otherwise.
pub fn sample_training_region(
    mesh: &Mesh,
    graph: &FaceAdjacencyGraph,
    budget: usize,
    w: usize,
    seed: u64,
) -> Result<RegionSpec, RegionError> {
    if mesh.faces.is_empty() {
        return Err(RegionError::Invalid("mesh has no faces".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seed_face = rng.random_range(0..mesh.faces.len());
    if rng.random_bool(PERCOLATION_SHARE) {
        let p = rng.random_range(PERCOLATION_P.0..PERCOLATION_P.1);
        sample_percolation_region(mesh, graph, seed_face, p, budget, rng.random(), w)
    } else {
        let mut spec = sample_bfs_region(mesh, graph, seed_face, budget, w)?;
        spec.seed = Some(seed);
        Ok(spec)
    }
}

/// Number of edges of `target` faces not shared with another target face.
pub fn region_perimeter(mesh: &Mesh, target: &FaceSet) -> usize {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in target {
        for (a, b) in mesh.faces[f].edges() {
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    count.values().filter(|&&n| n == 1).count()
}
