//! Orthographic software rasterizer producing a per-pixel G-buffer.

use crate::mesh::Mesh;
use crate::{Point, Vector};

/// Face id of pixels nothing was drawn to.
pub const EMPTY: u32 = u32::MAX;

/// Unit directions spread over the sphere along a golden-angle spiral,
/// running from `+z` to `-z`.
pub fn fibonacci_viewpoints(n: usize) -> Vec<Vector> {
    if n == 1 {
        return vec![Vector::z()];
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (n - 1) as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vector::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Orthographic camera placed at `distance * dir`, looking at the origin.
#[derive(Clone, Copy, Debug)]
pub struct Camera {
    /// Unit vector from the origin towards the camera.
    pub dir: Vector,
    pub distance: f64,
    /// Side of the square image plane in world units.
    pub frame: f64,
    pub resolution: usize,
    right: Vector,
    up: Vector,
}

impl Camera {
    pub fn new(dir: Vector, distance: f64, frame: f64, resolution: usize) -> Camera {
        let dir = dir.normalize();
        let helper = if dir.z.abs() < 0.9 { Vector::z() } else { Vector::x() };
        let right = helper.cross(&dir).normalize();
        let up = dir.cross(&right);
        Camera { dir, distance, frame, resolution, right, up }
    }

    /// Direction every ray travels in.
    pub fn forward(&self) -> Vector {
        -self.dir
    }

    fn eye(&self) -> Point {
        Point::from(self.dir * self.distance)
    }

    fn pixel_size(&self) -> f64 {
        self.frame / self.resolution as f64
    }

    /// Ray origin of pixel `(x, y)` on the camera plane; row 0 is the top.
    pub fn pixel_origin(&self, x: usize, y: usize) -> Point {
        let s = self.pixel_size();
        let u = (x as f64 + 0.5) * s - self.frame / 2.0;
        let v = self.frame / 2.0 - (y as f64 + 0.5) * s;
        self.eye() + self.right * u + self.up * v
    }

    /// Continuous pixel coordinates and depth of a world point.
    fn project(&self, p: &Point) -> [f64; 3] {
        let rel = p - self.eye();
        let s = self.pixel_size();
        [
            (rel.dot(&self.right) + self.frame / 2.0) / s - 0.5,
            (self.frame / 2.0 - rel.dot(&self.up)) / s - 0.5,
            rel.dot(&self.forward()),
        ]
    }
}

/// Per-pixel nearest surface. Pixel `(x, y)` lives at index `y * h + x`.
#[derive(Clone, Debug)]
pub struct GBuffer {
    pub resolution: usize,
    pub face: Vec<u32>,
    /// Distance from the camera plane along the view direction.
    pub depth: Vec<f64>,
    pub position: Vec<Point>,
    /// Unit geometric normal of the face (best-fit plane for quads).
    pub normal: Vec<Vector>,
}

impl GBuffer {
    pub fn pixel(&self, index: usize) -> (usize, usize) {
        (index % self.resolution, index / self.resolution)
    }

    pub fn covered(&self) -> usize {
        self.face.iter().filter(|&&f| f != EMPTY).count()
    }
}

fn edge(a: &[f64; 3], b: &[f64; 3], x: f64, y: f64) -> f64 {
    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
}

/// Barycentric slack so pixel centres on a shared edge are covered by both sides.
const COVER_SLACK: f64 = 1e-9;
/// Depths closer than this are a tie, won by the face turned more towards
/// the camera and then by the lower face id.
const DEPTH_TIE: f64 = 1e-9;

/// Draws every face with a depth test.
pub fn rasterize(mesh: &Mesh, camera: &Camera) -> GBuffer {
    let h = camera.resolution;
    let mut g = GBuffer {
        resolution: h,
        face: vec![EMPTY; h * h],
        depth: vec![f64::INFINITY; h * h],
        position: vec![Point::origin(); h * h],
        normal: vec![Vector::zeros(); h * h],
    };
    let forward = camera.forward();
    let screen: Vec<[f64; 3]> = mesh.vertices.iter().map(|p| camera.project(p)).collect();
    for (f, face) in mesh.faces.iter().enumerate() {
        let n = mesh.face_normal(f);
        let Some(n) = n.try_normalize(0.0) else { continue };
        for [a, b, c] in face.triangles() {
            let (pa, pb, pc) = (&screen[a], &screen[b], &screen[c]);
            let area = edge(pa, pb, pc[0], pc[1]);
            if area.abs() < 1e-12 {
                // seen edge-on
                continue;
            }
            let lo_x = pa[0].min(pb[0]).min(pc[0]).ceil().max(0.0);
            let hi_x = pa[0].max(pb[0]).max(pc[0]).floor().min(h as f64 - 1.0);
            let lo_y = pa[1].min(pb[1]).min(pc[1]).ceil().max(0.0);
            let hi_y = pa[1].max(pb[1]).max(pc[1]).floor().min(h as f64 - 1.0);
            if lo_x > hi_x || lo_y > hi_y {
                continue;
            }
            for y in lo_y as usize..=hi_y as usize {
                for x in lo_x as usize..=hi_x as usize {
                    let (fx, fy) = (x as f64, y as f64);
                    let w0 = edge(pb, pc, fx, fy) / area;
                    let w1 = edge(pc, pa, fx, fy) / area;
                    let w2 = 1.0 - w0 - w1;
                    if w0 < -COVER_SLACK || w1 < -COVER_SLACK || w2 < -COVER_SLACK {
                        continue;
                    }
                    let z = w0 * pa[2] + w1 * pb[2] + w2 * pc[2];
                    let i = y * h + x;
                    let cur = g.depth[i];
                    let wins = if (z - cur).abs() <= DEPTH_TIE {
                        let (mine, theirs) = (n.dot(&forward), g.normal[i].dot(&forward));
                        mine < theirs || (mine == theirs && (f as u32) < g.face[i])
                    } else {
                        z < cur
                    };
                    if wins {
                        g.depth[i] = z;
                        g.face[i] = f as u32;
                        g.normal[i] = n;
                        g.position[i] = camera.pixel_origin(x, y) + camera.forward() * z;
                    }
                }
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Face;
    use crate::synth;

    #[test]
    fn views_are_unit_and_spread() {
        assert_eq!(fibonacci_viewpoints(1), vec![Vector::z()]);
        let v = fibonacci_viewpoints(48);
        assert_eq!(v.len(), 48);
        assert!(v.iter().all(|d| (d.norm() - 1.0).abs() < 1e-12));
        let mut min_angle = f64::INFINITY;
        for i in 0..48 {
            for j in i + 1..48 {
                min_angle = min_angle.min(v[i].dot(&v[j]).clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        assert!(min_angle > 15.0, "{min_angle}");
        let centroid: Vector = v.iter().sum::<Vector>() / 48.0;
        assert!(centroid.norm() < 0.05, "{}", centroid.norm());
    }

    #[test]
    fn center_pixel_sees_facing_triangle() {
        let tri = Mesh::new(
            vec![Point::new(-0.5, -0.5, 0.1), Point::new(0.5, -0.5, 0.0), Point::new(0.0, 0.5, -0.1)],
            vec![Face::Tri([0, 1, 2])],
        )
        .unwrap();
        let cam = Camera::new(Vector::z(), 2.0, 2.2, 65);
        let g = rasterize(&tri, &cam);
        let center = 32 * 65 + 32;
        assert_eq!(g.face[center], 0);
        let expected = tri.face_normal(0).normalize();
        assert!((g.normal[center] - expected).norm() < 1e-6);
        // the stored position lies on the triangle's plane
        assert!((g.position[center] - tri.vertices[0]).dot(&expected).abs() < 1e-12);
    }

    #[test]
    fn empty_mesh_draws_nothing() {
        let g = rasterize(&Mesh::default(), &Camera::new(Vector::x(), 2.0, 2.2, 16));
        assert_eq!(g.covered(), 0);
        assert!(g.face.iter().all(|&f| f == EMPTY));
    }

    #[test]
    fn cube_axis_view_matches_projected_area() {
        let cube = synth::cube(0.5);
        let h = 220;
        let g = rasterize(&cube, &Camera::new(Vector::z(), 2.0, 2.2, h));
        // a unit square over a 2.2-wide frame
        let expected = (1.0 / 2.2) * (1.0 / 2.2) * (h * h) as f64;
        let got = g.covered() as f64;
        assert!((got - expected).abs() / expected < 0.02, "{got} vs {expected}");
        // only the +z face is visible
        let top = (0..cube.faces.len()).find(|&f| cube.face_normal(f).z > 0.5).unwrap() as u32;
        assert!(g.face.iter().all(|&f| f == EMPTY || f == top));
    }

    #[test]
    fn nearest_surface_wins() {
        let sphere = synth::uv_sphere(12, 24, 1.0);
        let cam = Camera::new(Vector::new(0.3, -0.5, 0.8), 2.0, 2.2, 64);
        let g = rasterize(&sphere, &cam);
        for i in 0..g.face.len() {
            if g.face[i] != EMPTY {
                assert!(g.normal[i].dot(&cam.forward()) < 0.0, "a far face is showing");
            }
        }
    }
}
