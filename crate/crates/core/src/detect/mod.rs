//! Multi-view defect detection.
//!
//! Each view rasterizes the mesh, flags pixels whose visible face points away
//! from the camera, and keeps those where the reference surface seen along
//! the same ray is correctly oriented. Confirmed points from all views are
//! clustered by density.

mod dbscan;
mod raster;

pub use dbscan::{clusters_from_labels, dbscan};
pub use raster::{fibonacci_viewpoints, rasterize, Camera, GBuffer, EMPTY};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{normalize_jointly, Mesh, MeshError, Similarity};
use crate::spatial::TriangleBvh;
use crate::{Point, Vector, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("bad detector parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Which position a confirmed pixel reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSource {
    /// Where the ray meets the reference surface. For a hole this lands on the
    /// missing surface rather than on the inner wall seen through it.
    #[default]
    Reference,
    /// The rasterized point of the inspected mesh.
    Candidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub views: usize,
    pub resolution: usize,
    pub eps_dot: f64,
    pub eps_cls: f64,
    pub min_pts: usize,
    /// Clusters with fewer points are dropped.
    pub min_cluster: usize,
    pub camera_distance: f64,
    pub frame: f64,
    pub point_source: PointSource,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            views: 48,
            resolution: 640,
            eps_dot: 1e-4,
            eps_cls: 0.05,
            min_pts: 5,
            min_cluster: 10,
            camera_distance: 2.0,
            frame: 2.2,
            point_source: PointSource::Reference,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: &str| Err(DetectError::BadParameter(m.into()));
        if self.views == 0 {
            return bad("at least one view is needed");
        }
        if self.resolution == 0 {
            return bad("resolution must be positive");
        }
        if !(self.eps_cls > 0.0) || self.min_pts == 0 {
            return bad("eps_cls must be positive and min_pts at least 1");
        }
        if !(self.frame > 0.0) || !(self.camera_distance > 1.0) {
            return bad("the camera must sit outside the unit sphere with a positive frame");
        }
        Ok(())
    }

    pub fn cameras(&self) -> Vec<Camera> {
        fibonacci_viewpoints(self.views)
            .into_iter()
            .map(|d| Camera::new(d, self.camera_distance, self.frame, self.resolution))
            .collect()
    }
}

/// Back-face test on a view ray: `n . d > -eps_dot`, so grazing faces count.
pub fn is_backfacing(normal: &Vector, d: &Vector, eps_dot: f64) -> bool {
    normal.dot(d) > -eps_dot
}

/// Pixel indices whose visible face fails the back-face test, ascending.
/// `d` is taken from each pixel's ray origin to its surface point.
pub fn backface_candidates(g: &GBuffer, camera: &Camera, eps_dot: f64) -> Vec<usize> {
    (0..g.face.len())
        .filter(|&i| {
            if g.face[i] == EMPTY {
                return false;
            }
            let (x, y) = g.pixel(i);
            is_backfacing(&g.normal[i], &(g.position[i] - camera.pixel_origin(x, y)), eps_dot)
        })
        .collect()
}

/// First reference hit along the pixel's ray, if it faces the camera.
pub fn confirm_candidate(reference: &TriangleBvh, ref_mesh: &Mesh, camera: &Camera, pixel: (usize, usize), eps_dot: f64) -> Option<Point> {
    let origin = camera.pixel_origin(pixel.0, pixel.1);
    let hit = reference.raycast(&origin, &camera.forward(), 0.0)?;
    let n = ref_mesh.face_normal(hit.face).try_normalize(0.0)?;
    (!is_backfacing(&n, &(hit.point - origin), eps_dot)).then_some(hit.point)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokenPoint {
    pub position: [f64; 3],
    pub view: usize,
    /// `[x, y]` with row 0 at the top.
    pub pixel: [usize; 2],
}

impl BrokenPoint {
    pub fn point(&self) -> Point {
        Point::from(self.position)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewStats {
    pub direction: [f64; 3],
    pub covered: usize,
    pub candidates: usize,
    pub confirmed: usize,
}

/// Confirmed points in input coordinates plus their clusters. Cluster members
/// index `points` and every cluster has at least `min_cluster` members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub v: u32,
    pub points: Vec<BrokenPoint>,
    pub clusters: Vec<Vec<usize>>,
    pub views: Vec<ViewStats>,
    pub noise: usize,
}

impl Detection {
    pub fn cluster_points(&self, k: usize) -> Vec<Point> {
        self.clusters[k].iter().map(|&i| self.points[i].point()).collect()
    }

    pub fn clustered_point_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }
}

pub trait DefectDetector: Send + Sync {
    fn detect(&self, mesh: &Mesh, reference: &Mesh) -> Result<Detection, DetectError>;
}

/// The rasterize / confirm / cluster pipeline.
#[derive(Clone, Debug, Default)]
pub struct MultiViewDetector {
    pub config: DetectConfig,
}

impl MultiViewDetector {
    pub fn new(config: DetectConfig) -> MultiViewDetector {
        MultiViewDetector { config }
    }

    /// Runs on meshes already normalized into the unit sphere.
    pub fn detect_normalized(&self, mesh: &Mesh, reference: &Mesh) -> Result<Detection, DetectError> {
        let cfg = &self.config;
        cfg.validate()?;
        let bvh = TriangleBvh::new(reference);
        let mut points = Vec::new();
        let mut views = Vec::new();
        for (vi, cam) in cfg.cameras().iter().enumerate() {
            let g = rasterize(mesh, cam);
            let candidates = backface_candidates(&g, cam, cfg.eps_dot);
            let before = points.len();
            for &i in &candidates {
                let (x, y) = g.pixel(i);
                let Some(hit) = confirm_candidate(&bvh, reference, cam, (x, y), cfg.eps_dot) else { continue };
                let p = match cfg.point_source {
                    PointSource::Reference => hit,
                    PointSource::Candidate => g.position[i],
                };
                points.push(BrokenPoint { position: p.into(), view: vi, pixel: [x, y] });
            }
            views.push(ViewStats {
                direction: cam.dir.into(),
                covered: g.covered(),
                candidates: candidates.len(),
                confirmed: points.len() - before,
            });
        }
        let positions: Vec<Point> = points.iter().map(BrokenPoint::point).collect();
        let labels = dbscan(&positions, cfg.eps_cls, cfg.min_pts)?;
        let noise = labels.iter().filter(|l| l.is_none()).count();
        let clusters = clusters_from_labels(&labels, cfg.min_cluster);
        log::debug!("{} confirmed points, {} clusters", points.len(), clusters.len());
        Ok(Detection { v: SCHEMA_VERSION, points, clusters, views, noise })
    }
}

impl DefectDetector for MultiViewDetector {
    /// Normalizes both meshes with the transform fitted to the reference and
    /// reports points back in input coordinates.
    fn detect(&self, mesh: &Mesh, reference: &Mesh) -> Result<Detection, DetectError> {
        let (m, r, t): (Mesh, Mesh, Similarity) = normalize_jointly(mesh, reference)?;
        let mut out = self.detect_normalized(&m, &r)?;
        for p in &mut out.points {
            p.position = t.invert(&p.point()).into();
        }
        Ok(out)
    }
}
