use std::collections::HashMap;
use std::path::Path;

use super::{GenerateError, Generator, GeneratorRequest, PatchResult};
use crate::mesh::{load_obj, open_boundary_vertices, Face, Mesh};
use crate::spatial::NnIndex;
use crate::{FaceSet, Point};

/// Crop box growth, as a fraction of the target's bounding-box diagonal.
pub const CROP_EXPANSION: f64 = 0.05;
/// Snap radius in units of the crop's mean edge length.
pub const SNAP_FACTOR: f64 = 2.0;

/// Adapts a whole-mesh generator's output into a patch: crops the faces near
/// the target and snaps the crop's open border onto the exposed seam.
#[derive(Clone, Debug)]
pub struct StitchBackGenerator {
    pub whole: Mesh,
}

impl StitchBackGenerator {
    pub fn new(whole: Mesh) -> StitchBackGenerator {
        StitchBackGenerator { whole }
    }

    pub fn load(path: &Path) -> Result<StitchBackGenerator, GenerateError> {
        Ok(StitchBackGenerator::new(load_obj(path)?))
    }
}

fn mean_edge_length(mesh: &Mesh) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for face in &mesh.faces {
        for (a, b) in face.edges() {
            sum += (mesh.vertices[a] - mesh.vertices[b]).norm();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl Generator for StitchBackGenerator {
    fn id(&self) -> String {
        "stitch-back".into()
    }

    fn generate(&self, req: &GeneratorRequest) -> Result<PatchResult, GenerateError> {
        let mut result = PatchResult::empty(self.id());
        let Some((lo, hi)) = req.mesh.faces_bounding_box(&req.region.target) else {
            return Ok(result);
        };
        let pad = CROP_EXPANSION * (hi - lo).norm();
        let inside = |p: &Point| (0..3).all(|k| p[k] >= lo[k] - pad && p[k] <= hi[k] + pad);
        let crop_faces: FaceSet = (0..self.whole.faces.len()).filter(|&f| inside(&self.whole.face_centroid(f))).collect();
        if crop_faces.is_empty() {
            result.warn("whole mesh has no faces near the target".into());
            return Ok(result);
        }
        let crop = self.whole.submesh(&crop_faces);
        let tol = SNAP_FACTOR * mean_edge_length(&crop);

        let seam: Vec<usize> = req.region.boundary.iter().copied().collect();
        let seam_index = NnIndex::new(seam.iter().map(|&v| req.mesh.vertices[v]).collect());
        let border = open_boundary_vertices(&crop);

        // crop vertex -> patch slot; snapped vertices share the slot of their seam vertex
        let mut patch = Mesh::default();
        let mut seam_slot: HashMap<usize, usize> = HashMap::new();
        let mut slot = Vec::with_capacity(crop.vertices.len());
        for (v, p) in crop.vertices.iter().enumerate() {
            let hit = if border.contains(&v) { seam_index.nearest(p).filter(|&(_, d)| d <= tol) } else { None };
            let s = match hit {
                Some((k, _)) => *seam_slot.entry(k).or_insert_with(|| {
                    patch.vertices.push(req.mesh.vertices[seam[k]]);
                    patch.vertices.len() - 1
                }),
                None => {
                    patch.vertices.push(*p);
                    patch.vertices.len() - 1
                }
            };
            slot.push(s);
        }
        let mut collapsed = 0;
        for face in &crop.faces {
            let mapped: Face = face.map(|v| slot[v]);
            if mapped.is_degenerate() {
                collapsed += 1;
            } else {
                patch.faces.push(mapped);
            }
        }
        if collapsed > 0 {
            result.warn(format!("snapping collapsed {collapsed} cropped faces"));
        }
        // seam vertices the crop never reached still have to be present
        let present = NnIndex::new(patch.vertices.clone());
        for (k, &v) in seam.iter().enumerate() {
            let p = req.mesh.vertices[v];
            if !seam_slot.contains_key(&k) && present.nearest(&p).is_none_or(|(_, d)| d > 0.0) {
                patch.vertices.push(p);
            }
        }
        result.mesh = patch;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::FaceAdjacencyGraph;
    use crate::region::sample_bfs_region;
    use crate::synth;
    use crate::Vector;

    #[test]
    fn self_adaptation_covers_target_and_seam() {
        let mesh = synth::cube_sphere(8, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let region = sample_bfs_region(&mesh, &g, 40, 30, 2).unwrap();
        let req = GeneratorRequest::new(&mesh, &region, 0);
        let patch = StitchBackGenerator::new(mesh.clone()).generate(&req).unwrap().mesh;
        let index = NnIndex::new(patch.vertices.clone());
        for &v in &region.boundary {
            assert_eq!(index.nearest(&mesh.vertices[v]).unwrap().1, 0.0, "seam vertex {v} missing");
        }
        // every target face centroid is reproduced
        let centroids = NnIndex::new((0..patch.faces.len()).map(|f| patch.face_centroid(f)).collect());
        for &f in &region.target {
            assert!(centroids.nearest(&mesh.face_centroid(f)).unwrap().1 < 1e-12);
        }
    }

    #[test]
    fn far_away_whole_mesh_gives_empty_patch() {
        let mesh = synth::cube_sphere(4, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let region = sample_bfs_region(&mesh, &g, 3, 8, 1).unwrap();
        let (lo, hi) = mesh.bounding_box().unwrap();
        let shift = Vector::repeat(10.0 * (hi - lo).norm());
        let far = Mesh { vertices: mesh.vertices.iter().map(|p| p + shift).collect(), faces: mesh.faces.clone() };
        let out = StitchBackGenerator::new(far).generate(&GeneratorRequest::new(&mesh, &region, 0)).unwrap();
        assert!(out.mesh.faces.is_empty());
        assert_eq!(out.diagnostics.warnings.len(), 1);
    }

    #[test]
    fn expansion_constant() {
        assert_eq!(CROP_EXPANSION, 0.05);
        assert_eq!(SNAP_FACTOR, 2.0);
    }
}
