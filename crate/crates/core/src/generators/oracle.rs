use std::collections::HashSet;

use super::{GenerateError, Generator, GeneratorRequest, PatchResult};
use crate::mesh::{connected_components, FaceAdjacencyGraph, Mesh};
use crate::spatial::NnIndex;
use crate::{FaceSet, Point};

/// Positions closer than this count as the same vertex during lookup.
const MATCH_TOL: f64 = 1e-9;

/// Replays ground truth.
///
/// With an explicit target the patch is exactly that mesh. Otherwise the
/// ground-truth faces covering the region are looked up geometrically in a
/// reference mesh registered with the current one: reference faces whose
/// corners all sit on target vertices or on vertices the current mesh has
/// lost, minus faces the current mesh already has outside the target.
#[derive(Clone, Debug, Default)]
pub struct OracleGenerator {
    pub reference: Option<Mesh>,
    pub target: Option<Mesh>,
    /// Snap output vertices to token-grid bin centres.
    pub quantize: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Target,
    Lost,
    Kept,
}

impl OracleGenerator {
    pub fn with_reference(reference: Mesh) -> OracleGenerator {
        OracleGenerator { reference: Some(reference), ..Default::default() }
    }

    pub fn with_target(target: Mesh) -> OracleGenerator {
        OracleGenerator { target: Some(target), ..Default::default() }
    }

    fn lookup(&self, reference: &Mesh, req: &GeneratorRequest) -> Mesh {
        let mesh = req.mesh;
        let target_vertices = mesh.vertices_of(&req.region.target);
        let used = mesh.referenced_vertices();
        let current: Vec<usize> = (0..mesh.vertices.len()).filter(|&v| used[v]).collect();
        let index = NnIndex::new(current.iter().map(|&v| mesh.vertices[v]).collect());
        let role: Vec<Role> = reference
            .vertices
            .iter()
            .map(|p| match index.nearest(p) {
                Some((k, d)) if d <= MATCH_TOL => {
                    if target_vertices.contains(&current[k]) {
                        Role::Target
                    } else {
                        Role::Kept
                    }
                }
                _ => Role::Lost,
            })
            .collect();
        // faces the current mesh keeps, keyed by their corner positions
        let key = |pts: &mut Vec<[u64; 3]>| {
            pts.sort_unstable();
            pts.clone()
        };
        let corners = |m: &Mesh, f: usize| -> Vec<[u64; 3]> {
            m.face_points(f).map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect()
        };
        let kept: HashSet<Vec<[u64; 3]>> = (0..mesh.faces.len())
            .filter(|f| !req.region.target.contains(f))
            .map(|f| key(&mut corners(mesh, f)))
            .collect();
        let candidates: FaceSet = (0..reference.faces.len())
            .filter(|&f| {
                let vs = reference.faces[f].vertices();
                vs.iter().all(|&v| role[v] != Role::Kept) && !kept.contains(&key(&mut corners(reference, f)))
            })
            .collect();
        let graph = FaceAdjacencyGraph::build(reference);
        let touching: Vec<usize> = connected_components(&graph, &candidates)
            .into_iter()
            .filter(|c| c.iter().any(|&f| reference.faces[f].vertices().iter().any(|&v| role[v] == Role::Target)))
            .flatten()
            .collect();
        let faces: FaceSet = touching.into_iter().collect();
        reference.submesh(&faces)
    }
}

impl Generator for OracleGenerator {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn generate(&self, req: &GeneratorRequest) -> Result<PatchResult, GenerateError> {
        if req.region.target.is_empty() {
            return Ok(PatchResult::empty(self.id()));
        }
        let mut patch = match (&self.target, &self.reference) {
            (Some(t), _) => t.clone(),
            (None, Some(r)) => self.lookup(r, req),
            (None, None) => req.mesh.submesh(&req.region.target),
        };
        if self.quantize {
            let t = &req.token_transform;
            for p in &mut patch.vertices {
                let snapped: Point = req.quantization.snap_point(&t.apply(p))?;
                *p = t.invert(&snapped);
            }
        }
        let mut result = PatchResult::new(patch, self.id());
        if result.mesh.faces.is_empty() {
            result.warn("reference has no faces for this region".into());
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FaceAdjacencyGraph;
    use crate::region::sample_bfs_region;
    use crate::synth;

    #[test]
    fn lookup_recovers_deleted_faces() {
        let gt = synth::cube_sphere(6, 1.0);
        let hole: FaceSet = [100, 101, 107].into_iter().collect();
        let damaged = synth::delete_faces(&gt, &hole);
        let g = FaceAdjacencyGraph::build(&damaged);
        let rim = gt.vertices_of(&hole);
        let seeds: FaceSet = (0..damaged.faces.len())
            .filter(|&f| damaged.faces[f].vertices().iter().any(|v| rim.contains(v)))
            .collect();
        let target = crate::mesh::bfs_rings(&g, &seeds, 1, true).unwrap();
        let region = crate::region::extract_context(&damaged, &g, &target, 1).unwrap();
        let req = GeneratorRequest::new(&damaged, &region, 0);
        let patch = OracleGenerator::with_reference(gt.clone()).generate(&req).unwrap().mesh;
        assert_eq!(patch.faces.len(), region.target.len() + 3, "the three deleted faces come back");
    }

    #[test]
    fn identity_without_reference_and_quantized_bound() {
        let mesh = synth::cube_sphere(4, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let region = sample_bfs_region(&mesh, &g, 5, 10, 2).unwrap();
        let mut req = GeneratorRequest::new(&mesh, &region, 0);
        let plain = OracleGenerator::default().generate(&req).unwrap().mesh;
        assert_eq!(plain, mesh.submesh(&region.target));
        req.token_transform = crate::mesh::Similarity::identity().then_scale(0.5);
        let q = OracleGenerator { quantize: true, ..Default::default() }.generate(&req).unwrap().mesh;
        let worst = q
            .vertices
            .iter()
            .zip(&plain.vertices)
            .map(|(a, b)| ((a - b) * 0.5).amax())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 512.0 + 1e-15, "{worst}");
        let empty = crate::region::extract_context(&mesh, &g, &FaceSet::new(), 1).unwrap();
        assert!(OracleGenerator::default().generate(&GeneratorRequest::new(&mesh, &empty, 0)).unwrap().mesh.faces.is_empty());
    }
}
