use log::warn;
use serde::Serialize;

use super::{open_boundary_vertices, Mesh, MeshError};
use crate::spatial::NnIndex;

/// One patch vertex snapped onto a base vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeldPair {
    pub patch_vertex: usize,
    pub base_vertex: usize,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct WeldResult {
    pub mesh: Mesh,
    pub pairs: Vec<WeldPair>,
    /// Patch vertices that had more than one base candidate within tolerance.
    pub ambiguous: usize,
    /// Patch faces that collapsed because two of their corners welded to the
    /// same base vertex; they are dropped.
    pub collapsed_faces: usize,
}

/// Appends `patch` to `base`, replacing every patch vertex that lies within
/// `tol` of an open-boundary vertex of `base` by that vertex.
pub fn weld_patch(base: &Mesh, patch: &Mesh, tol: f64) -> Result<WeldResult, MeshError> {
    if !(tol > 0.0) {
        return Err(MeshError::BadTolerance);
    }
    let anchors: Vec<usize> = open_boundary_vertices(base).into_iter().collect();
    let index = NnIndex::new(anchors.iter().map(|&v| base.vertices[v]).collect());
    let mut mesh = base.clone();
    let mut pairs = Vec::new();
    let mut ambiguous = 0;
    let mut remap = Vec::with_capacity(patch.vertices.len());
    for (pv, p) in patch.vertices.iter().enumerate() {
        let hits = index.within_radius(p, tol);
        if hits.len() > 1 {
            ambiguous += 1;
            warn!("patch vertex {pv} has {} weld candidates within {tol}; using the nearest", hits.len());
        }
        match (hits.is_empty(), index.nearest(p)) {
            (false, Some((k, distance))) => {
                let base_vertex = anchors[k];
                pairs.push(WeldPair { patch_vertex: pv, base_vertex, distance });
                remap.push(base_vertex);
            }
            _ => {
                remap.push(mesh.vertices.len());
                mesh.vertices.push(*p);
            }
        }
    }
    let mut collapsed_faces = 0;
    for face in &patch.faces {
        let mapped = face.map(|v| remap[v]);
        if mapped.is_degenerate() {
            collapsed_faces += 1;
        } else {
            mesh.faces.push(mapped);
        }
    }
    if collapsed_faces > 0 {
        warn!("{collapsed_faces} patch faces collapsed during welding and were dropped");
    }
    Ok(WeldResult { mesh, pairs, ambiguous, collapsed_faces })
}
