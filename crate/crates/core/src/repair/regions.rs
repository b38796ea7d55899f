use serde::{Deserialize, Serialize};

use super::RepairError;
use crate::mesh::{bfs_rings, connected_components, shortest_path, FaceAdjacencyGraph, Mesh};
use crate::spatial::TriangleBvh;
use crate::union_find::UnionFind;
use crate::{FaceSet, Point};

/// Target rings grown around the seed faces.
pub const TARGET_WIDTH: usize = 3;
/// Context rings around each target.
pub const CONTEXT_WIDTH: usize = 1;

/// One region to regenerate, with the clusters that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DamageGroup {
    pub target: FaceSet,
    pub context: FaceSet,
    pub clusters: Vec<usize>,
}

impl DamageGroup {
    fn footprint(&self) -> FaceSet {
        self.target.union(&self.context).copied().collect()
    }
}

/// Joins the components of `faces` into one by adding shortest face paths,
/// always linking the next component to everything gathered so far.
/// Components the graph cannot reach are dropped with a warning.
pub fn link_components(graph: &FaceAdjacencyGraph, faces: &FaceSet) -> FaceSet {
    let mut comps = connected_components(graph, faces).into_iter();
    let Some(mut joined) = comps.next() else { return FaceSet::new() };
    for comp in comps {
        match shortest_path(graph, &joined, &comp) {
            Some(path) => {
                joined.extend(path);
                joined.extend(comp);
            }
            None => log::warn!("dropping {} seed faces not connected to the rest of the mesh", comp.len()),
        }
    }
    joined
}

fn grow(graph: &FaceAdjacencyGraph, seeds: &FaceSet, w_target: usize, w_context: usize, clusters: Vec<usize>) -> Result<DamageGroup, RepairError> {
    let linked = link_components(graph, seeds);
    let target = bfs_rings(graph, &linked, w_target, true)?;
    let context = bfs_rings(graph, &target, w_context, false)?;
    Ok(DamageGroup { target, context, clusters })
}

/// Turns clusters of broken points into disjoint damage groups: nearest-face
/// seeds, linked into one component, grown into a target and a context ring.
/// Groups whose target or context overlap are merged until none do. Groups
/// come back ordered by smallest target face.
pub fn extract_damage_regions(
    mesh: &Mesh,
    graph: &FaceAdjacencyGraph,
    clusters: &[Vec<Point>],
    w_target: usize,
    w_context: usize,
) -> Result<Vec<DamageGroup>, RepairError> {
    if clusters.iter().all(Vec::is_empty) {
        return Ok(Vec::new());
    }
    let bvh = TriangleBvh::new(mesh);
    assert!(!bvh.is_empty(), "broken points need a mesh with faces to map onto");
    let mut groups = Vec::new();
    for (k, pts) in clusters.iter().enumerate() {
        let seeds: FaceSet = pts.iter().filter_map(|p| bvh.closest(p).map(|h| h.face)).collect();
        if seeds.is_empty() {
            continue;
        }
        groups.push(grow(graph, &seeds, w_target, w_context, vec![k])?);
    }
    loop {
        let n = groups.len();
        let mut uf = UnionFind::new(n);
        let feet: Vec<FaceSet> = groups.iter().map(DamageGroup::footprint).collect();
        let mut merged_any = false;
        for i in 0..n {
            for j in i + 1..n {
                if !feet[i].is_disjoint(&feet[j]) {
                    merged_any |= uf.union(i, j);
                }
            }
        }
        if !merged_any {
            break;
        }
        let mut next = Vec::new();
        for members in uf.groups() {
            if members.len() == 1 {
                next.push(groups[members[0]].clone());
                continue;
            }
            let target: FaceSet = members.iter().flat_map(|&g| groups[g].target.iter().copied()).collect();
            let mut ids: Vec<usize> = members.iter().flat_map(|&g| groups[g].clusters.iter().copied()).collect();
            ids.sort_unstable();
            // targets that only met through their contexts get linked too
            next.push(grow(graph, &target, 0, w_context, ids)?);
        }
        groups = next;
    }
    groups.sort_by_key(|g| g.target.first().copied());
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn single_face_cluster_on_a_grid() {
        let mesh = synth::grid(15, 15, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let c = 7 * 15 + 7;
        let groups = extract_damage_regions(&mesh, &g, &[vec![mesh.face_centroid(c)]], 3, 1).unwrap();
        assert_eq!(groups.len(), 1);
        // edge adjacency: the w-ring of a grid cell is a diamond |dx| + |dy| <= w
        let diamond = |w: i64| -> FaceSet {
            (0..225)
                .filter(|f| {
                    let (x, y) = ((f % 15) as i64, (f / 15) as i64);
                    (x - 7).abs() + (y - 7).abs() <= w
                })
                .collect()
        };
        assert_eq!(groups[0].target, diamond(3));
        let ring: FaceSet = diamond(4).difference(&diamond(3)).copied().collect();
        assert_eq!(groups[0].context, ring);
    }

    #[test]
    fn overlapping_groups_merge_and_far_ones_do_not() {
        let mesh = synth::grid(30, 30, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let at = |x: usize, y: usize| mesh.face_centroid(y * 30 + x);
        // 8 apart: the targets stay separate but their contexts share a face
        let near = extract_damage_regions(&mesh, &g, &[vec![at(5, 5)], vec![at(13, 5)]], 3, 1).unwrap();
        assert_eq!(near.len(), 1);
        assert_eq!(near[0].clusters, vec![0, 1]);
        assert_eq!(connected_components(&g, &near[0].target).len(), 1);
        assert!(near[0].target.is_disjoint(&near[0].context));
        let far = extract_damage_regions(&mesh, &g, &[vec![at(3, 3)], vec![at(25, 25)]], 3, 1).unwrap();
        assert_eq!(far.len(), 2);
        assert!(far[0].footprint().is_disjoint(&far[1].footprint()));
    }

    #[test]
    fn opposite_poles_stay_apart() {
        let mesh = synth::uv_sphere(16, 32, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let groups = extract_damage_regions(
            &mesh,
            &g,
            &[vec![Point::new(0.0, 0.0, 1.0)], vec![Point::new(0.0, 0.0, -1.0)]],
            3,
            1,
        )
        .unwrap();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn scattered_seeds_are_linked() {
        let mesh = synth::grid(20, 20, 1.0);
        let g = FaceAdjacencyGraph::build(&mesh);
        let pts = vec![mesh.face_centroid(2 * 20 + 2), mesh.face_centroid(2 * 20 + 17)];
        let groups = extract_damage_regions(&mesh, &g, &[pts], 0, 1).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(connected_components(&g, &groups[0].target).len(), 1);
        assert_eq!(groups[0].target.len(), 16);
    }
}
