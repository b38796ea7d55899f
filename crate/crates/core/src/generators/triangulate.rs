use std::collections::HashMap;

use super::{GenerateError, Generator, GeneratorRequest, PatchResult};
use crate::mesh::{Face, Mesh};
use crate::spatial::{triangle_area, triangle_normal};
use crate::{Point, Vector};

/// Relative tolerance under which two area sums count as tied.
const AREA_TIE: f64 = 1e-12;

/// Fills each seam loop with a minimum-area triangulation over the loop's own
/// vertices. Ties on area prefer the smaller maximum dihedral angle, measured
/// against the neighbouring outside faces and between the new triangles.
#[derive(Clone, Debug, Default)]
pub struct TriangulateGenerator;

/// Triangles as index triples into the loop, in loop winding.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopTriangulation {
    pub triangles: Vec<[usize; 3]>,
    pub area: f64,
    pub max_dihedral: f64,
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    area: f64,
    dihedral: f64,
    split: usize,
}

fn angle_between(a: &Vector, b: &Vector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    let tol = AREA_TIE * a.0.abs().max(b.0.abs()).max(1e-300);
    if (a.0 - b.0).abs() > tol {
        a.0 < b.0
    } else {
        a.1 < b.1
    }
}

/// Dynamic program over the closed polygon `points`. `outer[k]` is the normal
/// of the face across edge `(k, k + 1)`, if known.
pub fn min_weight_triangulation(points: &[Point], outer: &[Option<Vector>]) -> LoopTriangulation {
    let n = points.len();
    if n < 3 {
        return LoopTriangulation { triangles: Vec::new(), area: 0.0, max_dihedral: 0.0 };
    }
    let normal = |i: usize, m: usize, j: usize| triangle_normal(&points[i], &points[m], &points[j]);
    let mut table: Vec<Vec<Option<Cell>>> = vec![vec![None; n]; n];
    // (i, j) with j = i + 1 are polygon edges: empty, zero weight
    for gap in 2..n {
        for i in 0..n - gap {
            let j = i + gap;
            let mut best: Option<Cell> = None;
            for m in i + 1..j {
                let t = normal(i, m, j);
                let mut dihedral: f64 = 0.0;
                let mut area = triangle_area(&points[i], &points[m], &points[j]);
                for (a, b) in [(i, m), (m, j)] {
                    if b == a + 1 {
                        if let Some(o) = outer.get(a).copied().flatten() {
                            dihedral = dihedral.max(angle_between(&t, &o));
                        }
                    } else {
                        let sub = table[a][b].expect("shorter spans are filled first");
                        area += sub.area;
                        dihedral = dihedral.max(sub.dihedral).max(angle_between(&t, &normal(a, sub.split, b)));
                    }
                }
                if i == 0 && j == n - 1 {
                    // closing edge (n-1, 0)
                    if let Some(o) = outer.get(n - 1).copied().flatten() {
                        dihedral = dihedral.max(angle_between(&t, &o));
                    }
                }
                if best.is_none_or(|b| better((area, dihedral), (b.area, b.dihedral))) {
                    best = Some(Cell { area, dihedral, split: m });
                }
            }
            table[i][j] = best;
        }
    }
    let mut triangles = Vec::with_capacity(n - 2);
    let mut stack = vec![(0, n - 1)];
    while let Some((i, j)) = stack.pop() {
        if j < i + 2 {
            continue;
        }
        let m = table[i][j].expect("filled").split;
        triangles.push([i, m, j]);
        stack.push((i, m));
        stack.push((m, j));
    }
    let root = table[0][n - 1].expect("filled");
    LoopTriangulation { triangles, area: root.area, max_dihedral: root.dihedral }
}

impl Generator for TriangulateGenerator {
    fn id(&self) -> String {
        "triangulate".into()
    }

    fn generate(&self, req: &GeneratorRequest) -> Result<PatchResult, GenerateError> {
        let mesh = req.mesh;
        let mut result = PatchResult::empty(self.id());
        if req.loops.is_empty() {
            if !req.region.target.is_empty() {
                result.warn("target has no seam to fill".into());
            }
            return Ok(result);
        }
        // normal of the outside face on each directed seam edge
        let mut outside: HashMap<(usize, usize), Vector> = HashMap::new();
        for (f, face) in mesh.faces.iter().enumerate() {
            if req.region.target.contains(&f) {
                continue;
            }
            for (a, b) in face.edges() {
                // the outside face walks the seam edge the other way
                outside.insert((b, a), mesh.face_normal(f));
            }
        }
        let mut patch = Mesh::default();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for seam in &req.loops {
            if !seam.closed {
                result.warn(format!("seam starting at vertex {} is open; closing it with a straight edge", seam.vertices[0]));
            }
            let n = seam.vertices.len();
            if n < 3 {
                continue;
            }
            let points: Vec<Point> = seam.vertices.iter().map(|&v| mesh.vertices[v]).collect();
            let outer: Vec<Option<Vector>> =
                (0..n).map(|k| outside.get(&(seam.vertices[k], seam.vertices[(k + 1) % n])).copied()).collect();
            let tri = min_weight_triangulation(&points, &outer);
            for [a, b, c] in tri.triangles {
                let ids = [a, b, c].map(|k| {
                    let v = seam.vertices[k];
                    *slot.entry(v).or_insert_with(|| {
                        patch.vertices.push(mesh.vertices[v]);
                        patch.vertices.len() - 1
                    })
                });
                let face = Face::Tri(ids);
                if face.is_degenerate() {
                    result.warn("seam revisits a vertex; skipped a degenerate triangle".into());
                    continue;
                }
                patch.faces.push(face);
            }
        }
        result.mesh = patch;
        Ok(result)
    }
}
