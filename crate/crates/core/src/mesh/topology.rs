use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError};
use crate::{FaceSet, VertexSet};

/// Which faces count as neighbours when growing rings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjacency {
    /// Faces sharing an undirected edge.
    #[default]
    Edge,
    /// Faces sharing at least one vertex.
    Vertex,
}

/// Per-face neighbour lists, sorted ascending.
#[derive(Clone, Debug)]
pub struct FaceAdjacencyGraph {
    neighbors: Vec<Vec<usize>>,
    adjacency: Adjacency,
}

impl FaceAdjacencyGraph {
    pub fn build(mesh: &Mesh) -> FaceAdjacencyGraph {
        Self::with_adjacency(mesh, Adjacency::Edge)
    }

    pub fn with_adjacency(mesh: &Mesh, adjacency: Adjacency) -> FaceAdjacencyGraph {
        let mut neighbors = vec![Vec::new(); mesh.faces.len()];
        match adjacency {
            Adjacency::Edge => {
                let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
                for (f, face) in mesh.faces.iter().enumerate() {
                    for (a, b) in face.edges() {
                        by_edge.entry((a.min(b), a.max(b))).or_default().push(f);
                    }
                }
                for faces in by_edge.values() {
                    for &f in faces {
                        neighbors[f].extend(faces.iter().copied().filter(|&g| g != f));
                    }
                }
            }
            Adjacency::Vertex => {
                let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertices.len()];
                for (f, face) in mesh.faces.iter().enumerate() {
                    for &v in face.vertices() {
                        by_vertex[v].push(f);
                    }
                }
                for faces in &by_vertex {
                    for &f in faces {
                        neighbors[f].extend(faces.iter().copied().filter(|&g| g != f));
                    }
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        FaceAdjacencyGraph { neighbors, adjacency }
    }

    pub fn neighbors(&self, face: usize) -> &[usize] {
        &self.neighbors[face]
    }

    pub fn face_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn adjacency(&self) -> Adjacency {
        self.adjacency
    }
}

/// Multi-source BFS hop counts; `None` for unreachable faces or faces beyond
/// `max_depth`.
pub fn bfs_distances(
    graph: &FaceAdjacencyGraph,
    seeds: impl IntoIterator<Item = usize>,
    max_depth: Option<usize>,
) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.face_count()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if dist[s].is_none() {
            dist[s] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(f) = queue.pop_front() {
        let d = dist[f].expect("queued faces have a distance");
        if max_depth.is_some_and(|m| d >= m) {
            continue;
        }
        for &g in graph.neighbors(f) {
            if dist[g].is_none() {
                dist[g] = Some(d + 1);
                queue.push_back(g);
            }
        }
    }
    dist
}

/// Faces within `w` hops of `seed`. With `include_seed == false` the seed
/// faces are removed from the result, which is how contexts are formed.
pub fn bfs_rings(graph: &FaceAdjacencyGraph, seed: &FaceSet, w: usize, include_seed: bool) -> Result<FaceSet, MeshError> {
    if let Some(&bad) = seed.iter().find(|&&f| f >= graph.face_count()) {
        return Err(MeshError::FaceOutOfRange(bad));
    }
    let dist = bfs_distances(graph, seed.iter().copied(), Some(w));
    Ok(dist
        .iter()
        .enumerate()
        .filter(|(f, d)| d.is_some() && (include_seed || !seed.contains(f)))
        .map(|(f, _)| f)
        .collect())
}

/// Vertices incident to at least one target face and at least one face
/// outside the target: the seam left open when the target is removed.
pub fn boundary_vertices(mesh: &Mesh, target: &FaceSet) -> VertexSet {
    let mut touches_target = vec![false; mesh.vertices.len()];
    let mut touches_other = vec![false; mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let flags = if target.contains(&f) { &mut touches_target } else { &mut touches_other };
        for &v in face.vertices() {
            flags[v] = true;
        }
    }
    (0..mesh.vertices.len()).filter(|&v| touches_target[v] && touches_other[v]).collect()
}

/// Connected components of the subgraph induced by `faces`, ordered by their
/// smallest face id.
pub fn connected_components(graph: &FaceAdjacencyGraph, faces: &FaceSet) -> Vec<FaceSet> {
    let mut seen = FaceSet::new();
    let mut out = Vec::new();
    for &start in faces {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = FaceSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(f) = queue.pop_front() {
            for &g in graph.neighbors(f) {
                if faces.contains(&g) && seen.insert(g) {
                    comp.insert(g);
                    queue.push_back(g);
                }
            }
        }
        out.push(comp);
    }
    out
}

pub fn is_connected(graph: &FaceAdjacencyGraph, faces: &FaceSet) -> bool {
    connected_components(graph, faces).len() <= 1
}

/// Largest component of the induced subgraph; ties go to the component
/// holding the smallest face id.
pub fn largest_connected_component(graph: &FaceAdjacencyGraph, faces: &FaceSet) -> FaceSet {
    let mut best = FaceSet::new();
    for comp in connected_components(graph, faces) {
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Shortest face path from any face of `from` to any face of `to`, both
/// endpoints included. Neighbours are expanded in ascending id order so the
/// result is deterministic.
pub fn shortest_path(graph: &FaceAdjacencyGraph, from: &FaceSet, to: &FaceSet) -> Option<Vec<usize>> {
    let mut parent: HashMap<usize, Option<usize>> = HashMap::new();
    let mut queue = VecDeque::new();
    for &f in from {
        parent.insert(f, None);
        queue.push_back(f);
    }
    while let Some(f) = queue.pop_front() {
        if to.contains(&f) {
            let mut path = vec![f];
            let mut cur = f;
            while let Some(Some(p)) = parent.get(&cur) {
                path.push(*p);
                cur = *p;
            }
            path.reverse();
            return Some(path);
        }
        for &g in graph.neighbors(f) {
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(g) {
                e.insert(Some(f));
                queue.push_back(g);
            }
        }
    }
    None
}

/// Number of faces using each undirected edge, keyed `(min, max)`.
pub fn edge_incidence(mesh: &Mesh) -> HashMap<(usize, usize), usize> {
    let mut count = HashMap::new();
    for face in &mesh.faces {
        for (a, b) in face.edges() {
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    count
}

/// Vertices on edges used by exactly one face.
pub fn open_boundary_vertices(mesh: &Mesh) -> VertexSet {
    edge_incidence(mesh)
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .flat_map(|((a, b), _)| [a, b])
        .collect()
}

/// A seam between a target region and the rest of the mesh, in the target's
/// winding. `closed` is false when the seam runs into the open border of the
/// mesh; the chain then starts and ends on border vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeamLoop {
    pub vertices: Vec<usize>,
    pub closed: bool,
}

/// Seam loops of `target`: chains of target-face edges whose other side is a
/// face outside the target. Edges on the open border of the mesh are never
/// part of a seam.
pub fn boundary_loops(mesh: &Mesh, target: &FaceSet) -> Vec<SeamLoop> {
    let incidence = edge_incidence(mesh);
    let mut inside: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in target {
        for (a, b) in mesh.faces[f].edges() {
            *inside.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut indegree: HashMap<usize, usize> = HashMap::new();
    for &f in target {
        for (a, b) in mesh.faces[f].edges() {
            let key = (a.min(b), a.max(b));
            if inside[&key] == 1 && incidence[&key] >= 2 {
                next.entry(a).or_default().push(b);
                *indegree.entry(b).or_insert(0) += 1;
            }
        }
    }
    for outs in next.values_mut() {
        outs.sort_unstable();
    }
    // open chains first, starting where more edges leave than arrive
    let mut starts: Vec<usize> = next
        .iter()
        .filter(|(v, outs)| outs.len() > indegree.get(v).copied().unwrap_or(0))
        .map(|(&v, _)| v)
        .collect();
    let mut loops = Vec::new();
    loop {
        let start = match starts.pop() {
            Some(s) => s,
            None => match next.iter().find(|(_, outs)| !outs.is_empty()) {
                Some((&s, _)) => s,
                None => break,
            },
        };
        let mut chain = vec![start];
        let mut cur = start;
        let mut closed = false;
        while let Some(outs) = next.get_mut(&cur).filter(|o| !o.is_empty()) {
            let nxt = outs.remove(0);
            if nxt == start {
                closed = true;
                break;
            }
            chain.push(nxt);
            cur = nxt;
        }
        if closed && chain.len() < 3 {
            log::warn!("dropping degenerate seam cycle at vertex {start}");
            continue;
        }
        loops.push(SeamLoop { vertices: chain, closed });
    }
    loops
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn set(ids: &[usize]) -> FaceSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn adjacency_is_symmetric_and_bounded() {
        let mesh = synth::random_mixed_mesh(120, 5);
        let g = FaceAdjacencyGraph::build(&mesh);
        for f in 0..mesh.faces.len() {
            assert!(g.neighbors(f).len() <= mesh.faces[f].arity());
            for &n in g.neighbors(f) {
                assert!(g.neighbors(n).contains(&f));
            }
        }
    }

    #[test]
    fn zero_rings_is_the_seed() {
        let g = FaceAdjacencyGraph::build(&synth::grid(3, 3, 1.0));
        assert_eq!(bfs_rings(&g, &set(&[4]), 0, true).unwrap(), set(&[4]));
        assert!(bfs_rings(&g, &set(&[4]), 0, false).unwrap().is_empty());
    }

    #[test]
    fn one_ring_on_grid_centre() {
        let grid = synth::grid(3, 3, 1.0);
        let g = FaceAdjacencyGraph::build(&grid);
        assert_eq!(bfs_rings(&g, &set(&[4]), 1, false).unwrap(), set(&[1, 3, 5, 7]));
        let gv = FaceAdjacencyGraph::with_adjacency(&grid, Adjacency::Vertex);
        assert_eq!(bfs_rings(&gv, &set(&[4]), 1, false).unwrap(), set(&[0, 1, 2, 3, 5, 6, 7, 8]));
    }

    #[test]
    fn saturation_covers_component() {
        let g = FaceAdjacencyGraph::build(&synth::grid(5, 4, 1.0));
        assert_eq!(bfs_rings(&g, &set(&[0]), 100, true).unwrap().len(), 20);
    }

    #[test]
    fn out_of_range_seed() {
        let g = FaceAdjacencyGraph::build(&synth::grid(2, 2, 1.0));
        assert!(matches!(bfs_rings(&g, &set(&[9]), 1, true), Err(MeshError::FaceOutOfRange(9))));
    }

    #[test]
    fn grid_centre_boundary_is_its_corners() {
        let grid = synth::grid(3, 3, 1.0);
        // vertex ids on a 4x4 lattice: centre face corners are 5, 6, 9, 10
        assert_eq!(boundary_vertices(&grid, &set(&[4])), [5, 6, 9, 10].into_iter().collect());
        assert!(boundary_vertices(&grid, &(0..9).collect()).is_empty());
        assert!(boundary_vertices(&grid, &FaceSet::new()).is_empty());
    }

    #[test]
    fn components_and_ties() {
        let g = FaceAdjacencyGraph::build(&synth::grid(10, 1, 1.0));
        // 0..5 and 7..10: sizes 5 and 3
        let faces = set(&[0, 1, 2, 3, 4, 7, 8, 9]);
        assert_eq!(largest_connected_component(&g, &faces), set(&[0, 1, 2, 3, 4]));
        let tie = set(&[5, 6, 7, 8, 0, 1, 2, 3]);
        assert_eq!(largest_connected_component(&g, &tie), set(&[0, 1, 2, 3]));
        assert_eq!(largest_connected_component(&g, &set(&[3, 4])), set(&[3, 4]));
    }

    #[test]
    fn shortest_path_on_strip() {
        let g = FaceAdjacencyGraph::build(&synth::grid(10, 1, 1.0));
        assert_eq!(shortest_path(&g, &set(&[1]), &set(&[5, 9])).unwrap(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn seam_loop_of_grid_centre() {
        let grid = synth::grid(3, 3, 1.0);
        let loops = boundary_loops(&grid, &set(&[4]));
        assert_eq!(loops.len(), 1);
        assert!(loops[0].closed);
        // same cyclic order as the face itself
        let face = grid.faces[4].vertices().to_vec();
        let start = face.iter().position(|&v| v == loops[0].vertices[0]).unwrap();
        let rotated: Vec<usize> = (0..4).map(|i| face[(start + i) % 4]).collect();
        assert_eq!(loops[0].vertices, rotated);
    }

    #[test]
    fn seam_ignores_open_mesh_border() {
        let grid = synth::grid(3, 3, 1.0);
        let loops = boundary_loops(&grid, &set(&[0, 1, 2]));
        // the bottom row touches the open border; only its top side is a seam
        assert_eq!(loops, vec![SeamLoop { vertices: vec![7, 6, 5, 4], closed: false }]);
        let closed = synth::cube(1.0);
        let loops = boundary_loops(&closed, &set(&[0]));
        assert_eq!(loops.len(), 1);
        assert!(loops[0].closed);
        assert_eq!(loops[0].vertices.len(), 4);
    }
}
