//! Procedural meshes used by tests, benchmarks and the demo commands.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Face, Mesh};
use crate::{FaceSet, Point, Vector};

/// `nx * ny` unit quads in the z = 0 plane, facing +z.
///
/// Vertex `(i, j)` has id `j * (nx + 1) + i`; face `(i, j)` has id `j * nx + i`.
pub fn grid(nx: usize, ny: usize, cell: f64) -> Mesh {
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let vertices = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| Point::new(i as f64 * cell, j as f64 * cell, 0.0)))
        .collect();
    let faces = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Face::Quad([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])))
        .collect();
    Mesh { vertices, faces }
}

/// Axis-aligned cube with half-width `half`, six outward quads.
pub fn cube(half: f64) -> Mesh {
    let h = half;
    let vertices = vec![
        Point::new(-h, -h, -h),
        Point::new(h, -h, -h),
        Point::new(h, h, -h),
        Point::new(-h, h, -h),
        Point::new(-h, -h, h),
        Point::new(h, -h, h),
        Point::new(h, h, h),
        Point::new(-h, h, h),
    ];
    let faces = vec![
        Face::Quad([0, 3, 2, 1]),
        Face::Quad([4, 5, 6, 7]),
        Face::Quad([0, 1, 5, 4]),
        Face::Quad([2, 3, 7, 6]),
        Face::Quad([1, 2, 6, 5]),
        Face::Quad([3, 0, 4, 7]),
    ];
    Mesh { vertices, faces }
}

/// Latitude/longitude sphere: triangle fans at the poles, quads elsewhere,
/// outward winding. Has `slices * stacks` faces.
pub fn uv_sphere(stacks: usize, slices: usize, radius: f64) -> Mesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut vertices = vec![Point::new(0.0, 0.0, radius)];
    for s in 1..stacks {
        let theta = std::f64::consts::PI * s as f64 / stacks as f64;
        for k in 0..slices {
            let phi = std::f64::consts::TAU * k as f64 / slices as f64;
            vertices.push(Point::new(radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), radius * theta.cos()));
        }
    }
    let south = vertices.len();
    vertices.push(Point::new(0.0, 0.0, -radius));
    let ring = |s: usize, k: usize| 1 + (s - 1) * slices + k % slices;
    let mut faces = Vec::new();
    for k in 0..slices {
        faces.push(Face::Tri([0, ring(1, k), ring(1, k + 1)]));
    }
    for s in 1..stacks - 1 {
        for k in 0..slices {
            faces.push(Face::Quad([ring(s, k), ring(s + 1, k), ring(s + 1, k + 1), ring(s, k + 1)]));
        }
    }
    for k in 0..slices {
        faces.push(Face::Tri([south, ring(stacks - 1, k + 1), ring(stacks - 1, k)]));
    }
    Mesh { vertices, faces }
}

/// Cube subdivided into `n * n` quads per side and projected onto a sphere;
/// `6 n^2` faces, all quads, outward winding.
pub fn cube_sphere(n: usize, radius: f64) -> Mesh {
    assert!(n >= 1);
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |lattice: [usize; 3]| {
        *index.entry(lattice).or_insert_with(|| {
            let p = Vector::from_fn(|k, _| 2.0 * lattice[k] as f64 / n as f64 - 1.0);
            vertices.push(Point::from(p.normalize() * radius));
            vertices.len() - 1
        })
    };
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for high in [false, true] {
            for j in 0..n {
                for i in 0..n {
                    let mut corner = |di: usize, dj: usize| {
                        let mut l = [0; 3];
                        l[axis] = if high { n } else { 0 };
                        l[u] = i + di;
                        l[v] = j + dj;
                        vertex(l)
                    };
                    let quad = Face::Quad([corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]);
                    faces.push(if high { quad } else { quad.reversed() });
                }
            }
        }
    }
    Mesh { vertices, faces }
}

/// Radially displaces every vertex by a smooth random field of relative
/// amplitude `amplitude`. Meant for sphere-like meshes centred at the origin.
pub fn bumpy(mesh: &Mesh, amplitude: f64, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(Vector, f64)> = (0..4)
        .map(|_| {
            let dir = Vector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (dir * rng.random_range(1.0..3.0), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let vertices = mesh
        .vertices
        .iter()
        .map(|p| {
            let dir = p.coords.normalize();
            let field: f64 = waves.iter().map(|(k, phase)| (k.dot(&dir) + phase).sin()).sum::<f64>() / waves.len() as f64;
            Point::from(p.coords * (1.0 + amplitude * field))
        })
        .collect();
    Mesh { vertices, faces: mesh.faces.clone() }
}

/// Connected open height-field mesh with `n` faces, roughly 40% of them
/// triangles, jittered so that no two vertices share a coordinate by accident.
pub fn random_mixed_mesh(n: usize, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = ((n as f64).sqrt().ceil() as usize).max(1);
    let step = 1.0 / side as f64;
    let vid = |i: usize, j: usize| j * (side + 1) + i;
    let mut vertices = Vec::with_capacity((side + 1) * (side + 1));
    for j in 0..=side {
        for i in 0..=side {
            vertices.push(Point::new(
                (i as f64 + rng.random_range(-0.2..0.2)) * step - 0.5,
                (j as f64 + rng.random_range(-0.2..0.2)) * step - 0.5,
                rng.random_range(-0.15..0.15),
            ));
        }
    }
    let mut faces = Vec::new();
    'rows: for j in 0..side {
        for i in 0..side {
            let q = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)];
            if rng.random_bool(0.4) {
                if rng.random_bool(0.5) {
                    faces.push(Face::Tri([q[0], q[1], q[2]]));
                    faces.push(Face::Tri([q[0], q[2], q[3]]));
                } else {
                    faces.push(Face::Tri([q[0], q[1], q[3]]));
                    faces.push(Face::Tri([q[1], q[2], q[3]]));
                }
            } else {
                faces.push(Face::Quad(q));
            }
            if faces.len() >= n {
                break 'rows;
            }
        }
    }
    faces.truncate(n);
    Mesh { vertices, faces }.compacted().0
}

/// Copy of `mesh` with the winding of `face` reversed.
pub fn flip_face(mesh: &Mesh, face: usize) -> Mesh {
    let mut out = mesh.clone();
    out.faces[face] = out.faces[face].reversed();
    out
}

/// Copy of `mesh` without `faces`; the vertex table is left untouched so ids
/// stay comparable with the original.
pub fn delete_faces(mesh: &Mesh, faces: &FaceSet) -> Mesh {
    mesh.without_faces(faces)
}
