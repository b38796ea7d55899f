//! Bounding volume hierarchy over the triangles of a mesh.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::geometry::{closest_point_on_triangle, ray_triangle};
use crate::mesh::Mesh;
use crate::{Point, Vector};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Tri {
    a: Point,
    b: Point,
    c: Point,
    face: usize,
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Point,
    hi: Point,
}

impl Aabb {
    fn of(tri: &Tri) -> Aabb {
        Aabb { lo: tri.a.inf(&tri.b).inf(&tri.c), hi: tri.a.sup(&tri.b).sup(&tri.c) }
    }

    fn merge(&self, other: &Aabb) -> Aabb {
        Aabb { lo: self.lo.inf(&other.lo), hi: self.hi.sup(&other.hi) }
    }

    fn distance_squared(&self, p: &Point) -> f64 {
        (0..3)
            .map(|k| {
                let d = (self.lo[k] - p[k]).max(0.0).max(p[k] - self.hi[k]);
                d * d
            })
            .sum()
    }

    /// Entry parameter of the ray into the box, if it enters before `t_max`.
    fn ray_entry(&self, origin: &Point, dir: &Vector, t_max: f64) -> Option<f64> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = t_max;
        for k in 0..3 {
            if dir[k].abs() < 1e-300 {
                if origin[k] < self.lo[k] || origin[k] > self.hi[k] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[k];
            let (mut a, mut b) = ((self.lo[k] - origin[k]) * inv, (self.hi[k] - origin[k]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: usize,
    pub point: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub distance: f64,
    pub face: usize,
    pub point: Point,
}

/// Median-split BVH over a mesh's fan triangulation. Every triangle remembers
/// the face it came from, and all queries break exact ties by the smaller
/// face id.
#[derive(Clone, Debug)]
pub struct TriangleBvh {
    tris: Vec<Tri>,
    nodes: Vec<Node>,
}

struct Pending {
    dist2: f64,
    node: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist2.total_cmp(&self.dist2).then(other.node.cmp(&self.node))
    }
}

impl TriangleBvh {
    pub fn new(mesh: &Mesh) -> TriangleBvh {
        Self::from_faces(mesh, 0..mesh.faces.len())
    }

    /// BVH over a subset of the faces; hits report the original face ids.
    pub fn from_faces(mesh: &Mesh, faces: impl IntoIterator<Item = usize>) -> TriangleBvh {
        let tris: Vec<Tri> = faces
            .into_iter()
            .flat_map(|f| {
                mesh.faces[f].triangles().map(move |[a, b, c]| Tri {
                    a: mesh.vertices[a],
                    b: mesh.vertices[b],
                    c: mesh.vertices[c],
                    face: f,
                })
            })
            .collect();
        let mut bvh = TriangleBvh { tris, nodes: Vec::new() };
        if !bvh.tris.is_empty() {
            let n = bvh.tris.len();
            bvh.build(0, n);
        }
        bvh
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let bounds = self.tris[start..end].iter().map(Aabb::of).reduce(|a, b| a.merge(&b)).expect("non-empty");
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let centroid = |t: &Tri| (t.a.coords + t.b.coords + t.c.coords) / 3.0;
        let (lo, hi) = self.tris[start..end].iter().map(centroid).fold(
            (Vector::repeat(f64::INFINITY), Vector::repeat(f64::NEG_INFINITY)),
            |(lo, hi), c| (lo.inf(&c), hi.sup(&c)),
        );
        let axis = (hi - lo).imax();
        let mid = (end - start) / 2;
        self.tris[start..end].select_nth_unstable_by(mid, |x, y| centroid(x)[axis].total_cmp(&centroid(y)[axis]));
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// First intersection along `origin + t * dir` with `t > t_min`.
    pub fn raycast(&self, origin: &Point, dir: &Vector, t_min: f64) -> Option<RayHit> {
        if self.tris.is_empty() {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let limit = best.map_or(f64::INFINITY, |b| b.0);
            match self.nodes[n].bounds().ray_entry(origin, dir, limit) {
                None => continue,
                Some(t) if t > limit => continue,
                _ => {}
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for tri in &self.tris[start..end] {
                        if let Some(t) = ray_triangle(origin, dir, &tri.a, &tri.b, &tri.c, t_min) {
                            let better = match best {
                                None => true,
                                Some((bt, bf)) => t < bt || (t == bt && tri.face < bf),
                            };
                            if better {
                                best = Some((t, tri.face));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.map(|(t, face)| RayHit { t, face, point: origin + dir * t })
    }

    /// Closest surface point to `p`.
    pub fn closest(&self, p: &Point) -> Option<ClosestHit> {
        if self.tris.is_empty() {
            return None;
        }
        let mut best: Option<(f64, usize, Point)> = None;
        let mut heap = BinaryHeap::from([Pending { dist2: self.nodes[0].bounds().distance_squared(p), node: 0 }]);
        while let Some(Pending { dist2, node }) = heap.pop() {
            if best.is_some_and(|b| dist2 > b.0) {
                break;
            }
            match self.nodes[node] {
                Node::Leaf { start, end, .. } => {
                    for tri in &self.tris[start..end] {
                        let q = closest_point_on_triangle(p, &tri.a, &tri.b, &tri.c);
                        let d2 = (q - p).norm_squared();
                        let better = match best {
                            None => true,
                            Some((bd, bf, _)) => d2 < bd || (d2 == bd && tri.face < bf),
                        };
                        if better {
                            best = Some((d2, tri.face, q));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    for child in [left, right] {
                        let d = self.nodes[child].bounds().distance_squared(p);
                        if best.is_none_or(|b| d <= b.0) {
                            heap.push(Pending { dist2: d, node: child });
                        }
                    }
                }
            }
        }
        best.map(|(d2, face, point)| ClosestHit { distance: d2.sqrt(), face, point })
    }

    /// Whether any triangle lies within `radius` of `p` (inclusive).
    pub fn any_within(&self, p: &Point, radius: f64) -> bool {
        if self.tris.is_empty() {
            return false;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.nodes[n].bounds().distance_squared(p) > r2 {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for tri in &self.tris[start..end] {
                        let q = closest_point_on_triangle(p, &tri.a, &tri.b, &tri.c);
                        if (q - p).norm_squared() <= r2 {
                            return true;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }
}
