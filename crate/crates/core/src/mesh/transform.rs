use serde::{Deserialize, Serialize};

use super::{bounding_box, Mesh, MeshError};
use crate::{Point, Vector};

/// Uniform scale about a centre: `p -> (p - center) * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub center: [f64; 3],
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Similarity {
        Similarity { center: [0.0; 3], scale: 1.0 }
    }

    /// Centres on the bounding-box midpoint and scales the farthest point to
    /// unit distance.
    pub fn fit_unit_sphere<'a>(points: impl Iterator<Item = &'a Point> + Clone) -> Result<Similarity, MeshError> {
        let (lo, hi) = bounding_box(points.clone()).ok_or(MeshError::Empty)?;
        let center = nalgebra::center(&lo, &hi);
        let radius = points.map(|p| (p - center).norm()).fold(0.0, f64::max);
        if radius <= f64::MIN_POSITIVE {
            return Err(MeshError::ZeroScale);
        }
        Ok(Similarity { center: center.coords.into(), scale: 1.0 / radius })
    }

    fn center_point(&self) -> Vector {
        Vector::from(self.center)
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from((p.coords - self.center_point()) * self.scale)
    }

    pub fn invert(&self, p: &Point) -> Point {
        Point::from(p.coords / self.scale + self.center_point())
    }

    /// The transform followed by an extra uniform scale about the origin.
    pub fn then_scale(&self, factor: f64) -> Similarity {
        Similarity { center: self.center, scale: self.scale * factor }
    }

    pub fn apply_mesh(&self, mesh: &Mesh) -> Mesh {
        Mesh {
            vertices: mesh.vertices.iter().map(|p| self.apply(p)).collect(),
            faces: mesh.faces.clone(),
        }
    }

    pub fn invert_mesh(&self, mesh: &Mesh) -> Mesh {
        Mesh {
            vertices: mesh.vertices.iter().map(|p| self.invert(p)).collect(),
            faces: mesh.faces.clone(),
        }
    }
}

/// Centres the mesh on its bounding-box midpoint and scales it so the
/// farthest vertex sits on the unit sphere.
pub fn normalize_unit_sphere(mesh: &Mesh) -> Result<(Mesh, Similarity), MeshError> {
    let transform = Similarity::fit_unit_sphere(mesh.vertices.iter())?;
    Ok((transform.apply_mesh(mesh), transform))
}

/// Normalizes `mesh` and `reference` with the transform fitted to the
/// reference, so the two stay registered.
pub fn normalize_jointly(mesh: &Mesh, reference: &Mesh) -> Result<(Mesh, Mesh, Similarity), MeshError> {
    let (reference, transform) = normalize_unit_sphere(reference)?;
    Ok((transform.apply_mesh(mesh), reference, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn max_norm(mesh: &Mesh) -> f64 {
        mesh.vertices.iter().map(|p| p.coords.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn symmetric_cube_scales_by_inverse_half_diagonal() {
        let cube = synth::cube(2.0);
        let (out, t) = normalize_unit_sphere(&cube).unwrap();
        assert!((t.scale - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((max_norm(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_input_gives_identity() {
        let (once, _) = normalize_unit_sphere(&synth::random_mixed_mesh(40, 3)).unwrap();
        let (_, t) = normalize_unit_sphere(&once).unwrap();
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.center.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn inverse_round_trips() {
        let mut mesh = synth::random_mixed_mesh(60, 11);
        for p in &mut mesh.vertices {
            *p = Point::new(p.x * 3.0 + 7.0, p.y - 2.0, p.z * 0.5 + 1.0);
        }
        let (out, t) = normalize_unit_sphere(&mesh).unwrap();
        let back = t.invert_mesh(&out);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn coincident_vertices_fail() {
        let mesh = Mesh { vertices: vec![Point::new(1.0, 1.0, 1.0); 4], faces: vec![] };
        assert!(matches!(normalize_unit_sphere(&mesh), Err(MeshError::ZeroScale)));
        assert!(matches!(normalize_unit_sphere(&Mesh::default()), Err(MeshError::Empty)));
    }
}
