use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mesh, MeshError};
use crate::spatial::triangle_area;
use crate::Point;

/// Points drawn uniformly by area from a mesh surface.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSample {
    pub positions: Vec<Point>,
    pub source_face: Vec<usize>,
    pub seed: u64,
}

impl PointSample {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Area-weighted uniform sample of `n` surface points.
///
/// Triangles are visited in an order keyed on their corner coordinates rather
/// than on face ids, so two meshes with the same faces in different order (or
/// with a permuted vertex table) produce the same points for the same seed.
pub fn sample_points(mesh: &Mesh, n: usize, seed: u64) -> Result<PointSample, MeshError> {
    if n == 0 {
        return Err(MeshError::NoSamples);
    }
    let mut tris: Vec<([Point; 3], usize)> = mesh
        .faces
        .iter()
        .enumerate()
        .flat_map(|(f, face)| {
            face.triangles()
                .map(move |[a, b, c]| ([mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]], f))
        })
        .collect();
    tris.sort_by(|(x, fx), (y, fy)| {
        x.iter()
            .flat_map(|p| p.iter())
            .zip(y.iter().flat_map(|p| p.iter()))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(fx.cmp(fy))
    });
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for ([a, b, c], _) in &tris {
        total += triangle_area(a, b, c);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MeshError::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    let mut source_face = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= target).min(tris.len() - 1);
        let ([a, b, c], f) = tris[k];
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let p = a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2);
        positions.push(Point::from(p));
        source_face.push(f);
    }
    Ok(PointSample { positions, source_face, seed })
}
