//! Brute-force references and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use meshfim_core::mesh::{Face, Mesh};
use meshfim_core::tokenizer::Token;
use meshfim_core::{FaceSet, Point, VertexSet};
use nalgebra::{Rotation3, Vector3};
use rand::Rng;

/// Vertices used both by a target face and by some other face, found by
/// scanning every face pair.
pub fn brute_boundary(mesh: &Mesh, target: &FaceSet) -> VertexSet {
    let mut out = VertexSet::new();
    for &f in target {
        for (g, other) in mesh.faces.iter().enumerate() {
            if target.contains(&g) {
                continue;
            }
            for &v in mesh.faces[f].vertices() {
                if other.vertices().contains(&v) {
                    out.insert(v);
                }
            }
        }
    }
    out
}

/// Edge-sharing neighbours by comparing every pair of faces.
pub fn brute_neighbours(mesh: &Mesh) -> Vec<Vec<usize>> {
    let edges: Vec<Vec<(usize, usize)>> = mesh
        .faces
        .iter()
        .map(|f| f.edges().map(|(a, b)| (a.min(b), a.max(b))).collect())
        .collect();
    (0..mesh.faces.len())
        .map(|f| {
            (0..mesh.faces.len())
                .filter(|&g| g != f && edges[f].iter().any(|e| edges[g].contains(e)))
                .collect()
        })
        .collect()
}

pub fn bfs_distance(nb: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; nb.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        for &g in &nb[f] {
            if dist[g].is_none() {
                dist[g] = Some(dist[f].unwrap() + 1);
                queue.push_back(g);
            }
        }
    }
    dist
}

pub fn brute_connected(nb: &[Vec<usize>], faces: &FaceSet) -> bool {
    let Some(&start) = faces.first() else { return true };
    let mut seen = FaceSet::from([start]);
    let mut stack = vec![start];
    while let Some(f) = stack.pop() {
        for &g in &nb[f] {
            if faces.contains(&g) && seen.insert(g) {
                stack.push(g);
            }
        }
    }
    seen.len() == faces.len()
}

/// Faces ordered by (ring, id) from `start`, cut at `budget`.
pub fn bfs_reference(nb: &[Vec<usize>], start: usize, budget: usize) -> FaceSet {
    let dist = bfs_distance(nb, start);
    let mut reach: Vec<(usize, usize)> = dist.iter().enumerate().filter_map(|(f, d)| d.map(|d| (d, f))).collect();
    reach.sort_unstable();
    reach.into_iter().take(budget).map(|(_, f)| f).collect()
}

/// A face as its token triples in winding order, rotated to start at the
/// smallest triple.
pub fn face_key(tokens: Vec<[Token; 3]>) -> Vec<[Token; 3]> {
    let start = (0..tokens.len()).min_by_key(|&i| tokens[i]).unwrap();
    let mut out = tokens;
    out.rotate_left(start);
    out
}

pub fn multiset(keys: impl IntoIterator<Item = Vec<[Token; 3]>>) -> BTreeMap<Vec<[Token; 3]>, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Distance from `p` to triangle `abc`: the plane distance when the foot of
/// the perpendicular lies inside, otherwise the nearest edge.
pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let seg = |u: &Point, v: &Point| {
        let d = v - u;
        let t = if d.norm_squared() == 0.0 { 0.0 } else { ((p - u).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) };
        (p - (u + d * t)).norm()
    };
    let edges = seg(a, b).min(seg(b, c)).min(seg(c, a));
    let n = (b - a).cross(&(c - a));
    if n.norm_squared() == 0.0 {
        return edges;
    }
    let foot = p - n * ((p - a).dot(&n) / n.norm_squared());
    let inside = [(a, b), (b, c), (c, a)].iter().all(|(u, v)| (*v - *u).cross(&(foot - *u)).dot(&n) >= 0.0);
    if inside {
        (p - foot).norm()
    } else {
        edges
    }
}

pub fn brute_overflow(points: &[Point], residual: &Mesh, eps: f64) -> f64 {
    if points.is_empty() || residual.faces.is_empty() {
        return 0.0;
    }
    let tris: Vec<[usize; 3]> = residual.faces.iter().flat_map(Face::triangles).collect();
    let near = points
        .iter()
        .filter(|p| {
            tris.iter().any(|t| {
                let v = &residual.vertices;
                point_triangle_distance(p, &v[t[0]], &v[t[1]], &v[t[2]]) <= eps
            })
        })
        .count();
    near as f64 / points.len() as f64
}

pub fn brute_chamfer(from: &[Point], to: &[Point]) -> f64 {
    from.iter()
        .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / from.len() as f64
}

/// O(n^2) DBSCAN; border points go to the nearest core point, lowest index
/// on ties.
pub fn brute_dbscan(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |a: usize, b: usize| (points[a] - points[b]).norm_squared() <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut comp = vec![None; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || comp[s].is_some() {
            continue;
        }
        comp[s] = Some(next);
        let mut stack = vec![s];
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if core[b] && comp[b].is_none() && near(a, b) {
                    comp[b] = Some(next);
                    stack.push(b);
                }
            }
        }
        next += 1;
    }
    (0..n)
        .map(|i| {
            if core[i] {
                return comp[i];
            }
            (0..n)
                .filter(|&j| core[j] && near(i, j))
                .min_by(|&a, &b| {
                    let da = (points[i] - points[a]).norm_squared();
                    let db = (points[i] - points[b]).norm_squared();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .and_then(|j| comp[j])
        })
        .collect()
}

/// True when both labelings induce the same partition and the same noise.
pub fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<usize, usize> = HashMap::new();
    let mut back: HashMap<usize, usize> = HashMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

/// Random rotation and axis scaling. Affine maps keep planar quads planar.
pub fn random_pose(mesh: &Mesh, rng: &mut impl Rng) -> Mesh {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let rot = Rotation3::from_scaled_axis(axis.normalize() * rng.random_range(0.0..std::f64::consts::PI));
    let scale = Vector3::new(rng.random_range(0.75..1.25), rng.random_range(0.75..1.25), rng.random_range(0.75..1.25));
    let vertices = mesh.vertices.iter().map(|p| rot * Point::from(p.coords.component_mul(&scale))).collect();
    Mesh { vertices, faces: mesh.faces.clone() }
}

#[derive(Clone, Debug)]
pub enum Defect {
    /// Face ids of the pristine mesh that were removed.
    Deleted(FaceSet),
    Flipped(usize),
}

impl Defect {
    pub fn faces(&self) -> FaceSet {
        match self {
            Defect::Deleted(f) => f.clone(),
            Defect::Flipped(f) => FaceSet::from([*f]),
        }
    }
}

/// Faces of `damaged` touching a vertex of the defect. The damaged mesh keeps
/// the pristine vertex table, so vertex ids line up.
pub fn one_ring(pristine: &Mesh, damaged: &Mesh, defect: &Defect) -> FaceSet {
    let verts = pristine.vertices_of(&defect.faces());
    (0..damaged.faces.len())
        .filter(|&f| damaged.faces[f].vertices().iter().any(|v| verts.contains(v)))
        .collect()
}

/// Applies the defects: flips in place, then removes all deleted faces at
/// once (later ids shift, vertices do not).
pub fn apply_defects(mesh: &Mesh, defects: &[Defect]) -> Mesh {
    let mut out = mesh.clone();
    let mut removed = FaceSet::new();
    for d in defects {
        match d {
            Defect::Flipped(f) => out.faces[*f] = out.faces[*f].reversed(),
            Defect::Deleted(fs) => removed.extend(fs),
        }
    }
    out.without_faces(&removed)
}
