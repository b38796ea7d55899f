//! Gated fusion of reference and existing-mesh conditioning.
//!
//! Both point clouds are encoded against one shared [`QuerySet`], so row `i`
//! of either latent describes the neighbourhood of the same query position.
//! The gate network reads the concatenated rows and attenuates the reference
//! latent where the existing mesh already covers the surface.

pub mod nn;
mod params;

pub use params::{EncoderLayer, GateParams, HEAD_BIAS_INIT, HEAD_WEIGHT_STD, PARAMS_MAGIC, PARAMS_VERSION};

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::spatial::NnIndex;
use crate::Point;

pub const DEFAULT_LATENT_DIM: usize = 32;
pub const DEFAULT_QUERY_COUNT: usize = 256;
pub const DEFAULT_RADIUS: f64 = 0.1;

/// Features per radius: log count, mean offset (3), covariance trace.
const FEATURES_PER_RADIUS: usize = 5;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("latents were encoded against different query sets")]
    QueryMismatch,
    #[error("latent width {got} does not match the gate width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("latents have {gt} and {lp} rows")]
    RowMismatch { gt: usize, lp: usize },
    #[error("gate vector has {got} entries for {expected} rows")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cannot encode an empty point set")]
    EmptyPoints,
    #[error("latent width must be at least {0}")]
    WidthTooSmall(usize),
    #[error("invalid parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Query positions shared by both encoder branches. Clones share storage,
/// which is what [`gate`] checks.
#[derive(Clone, Debug)]
pub struct QuerySet {
    positions: Arc<Vec<Point>>,
}

impl QuerySet {
    pub fn new(positions: Vec<Point>) -> QuerySet {
        QuerySet { positions: Arc::new(positions) }
    }

    /// `m` distinct points drawn from the reference cloud (all of them when it
    /// has fewer), in draw order.
    pub fn from_reference(points: &[Point], m: usize, seed: u64) -> QuerySet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = m.min(points.len());
        QuerySet::new(sample(&mut rng, points.len(), m).iter().map(|i| points[i]).collect())
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same instance, or an identical list of positions.
    pub fn is_same(&self, other: &QuerySet) -> bool {
        Arc::ptr_eq(&self.positions, &other.positions) || self.positions == other.positions
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentSource {
    Gt,
    Lp,
}

/// `M x d` latent, one row per query.
#[derive(Clone, Debug)]
pub struct LatentGrid {
    pub values: DMatrix<f64>,
    pub source: LatentSource,
    pub queries: QuerySet,
}

/// Deterministic stand-in encoder: local point statistics around each query
/// at radii `r` and `2r`, zero-padded to `d` channels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalStatsEncoder {
    pub radius: f64,
    pub d: usize,
}

impl Default for LocalStatsEncoder {
    fn default() -> Self {
        LocalStatsEncoder { radius: DEFAULT_RADIUS, d: DEFAULT_LATENT_DIM }
    }
}

impl LocalStatsEncoder {
    /// Channel holding `log(1 + count)` at radius `r`.
    pub const LOG_COUNT_CHANNEL: usize = 0;

    pub fn encode(&self, points: &[Point], queries: &QuerySet, source: LatentSource) -> Result<LatentGrid, GateError> {
        if points.is_empty() {
            return Err(GateError::EmptyPoints);
        }
        let needed = 2 * FEATURES_PER_RADIUS;
        if self.d < needed {
            return Err(GateError::WidthTooSmall(needed));
        }
        let index = NnIndex::new(points.to_vec());
        let mut values = DMatrix::zeros(queries.len(), self.d);
        for (row, q) in queries.positions().iter().enumerate() {
            for (slot, r) in [self.radius, 2.0 * self.radius].into_iter().enumerate() {
                let near = index.within_radius(q, r);
                if near.is_empty() {
                    continue;
                }
                let n = near.len() as f64;
                let mean = near.iter().fold(crate::Vector::zeros(), |acc, &i| acc + (points[i] - q)) / n;
                let trace = near.iter().map(|&i| (points[i] - q - mean).norm_squared()).sum::<f64>() / n;
                let base = slot * FEATURES_PER_RADIUS;
                values[(row, base)] = n.ln_1p();
                for k in 0..3 {
                    values[(row, base + 1 + k)] = mean[k] / r;
                }
                values[(row, base + 4)] = trace / (r * r);
            }
        }
        Ok(LatentGrid { values, source, queries: queries.clone() })
    }
}

/// Per-query gate values in `(0, 1)`.
pub fn gate(z_gt: &LatentGrid, z_lp: &LatentGrid, params: &GateParams) -> Result<Vec<f64>, GateError> {
    if !z_gt.queries.is_same(&z_lp.queries) {
        return Err(GateError::QueryMismatch);
    }
    params.forward(&z_gt.values, &z_lp.values)
}

/// `(1 - g_i) * z_gt[i]` row by row.
pub fn fuse(z_gt: &LatentGrid, g: &[f64]) -> Result<LatentGrid, GateError> {
    if g.len() != z_gt.values.nrows() {
        return Err(GateError::LengthMismatch { expected: z_gt.values.nrows(), got: g.len() });
    }
    let mut out = z_gt.clone();
    for (mut row, gi) in out.values.row_iter_mut().zip(g) {
        row *= 1.0 - gi;
    }
    Ok(out)
}

/// `|lp points near q| / |gt points near q|` per query (0 where the reference
/// has no points nearby).
pub fn coverage(queries: &QuerySet, gt: &[Point], lp: &[Point], radius: f64) -> Vec<f64> {
    let gt_index = NnIndex::new(gt.to_vec());
    let lp_index = NnIndex::new(lp.to_vec());
    queries
        .positions()
        .iter()
        .map(|q| {
            let n_gt = gt_index.count_within(q, radius, usize::MAX);
            if n_gt == 0 {
                0.0
            } else {
                lp_index.count_within(q, radius, usize::MAX) as f64 / n_gt as f64
            }
        })
        .collect()
}

/// Pearson correlation; 0 when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Gate values, query positions and coverage for one region, for heat-map
/// style inspection.
#[derive(Clone, Debug, Serialize)]
pub struct GateDump {
    pub v: u32,
    pub queries: Vec<[f64; 3]>,
    pub gate: Vec<f64>,
    pub coverage: Vec<f64>,
    pub mean_gate: f64,
    pub relative_attenuation: f64,
}

/// Encodes both clouds against queries drawn from `gt`, gates, fuses, and
/// reports the result.
pub fn gate_dump(
    gt: &[Point],
    lp: &[Point],
    params: &GateParams,
    encoder: &LocalStatsEncoder,
    query_count: usize,
    seed: u64,
) -> Result<GateDump, GateError> {
    let queries = QuerySet::from_reference(gt, query_count, seed);
    let z_gt = encoder.encode(gt, &queries, LatentSource::Gt)?;
    let z_lp = if lp.is_empty() {
        // nothing left of the existing mesh: an all-zero branch
        LatentGrid { values: DMatrix::zeros(queries.len(), encoder.d), source: LatentSource::Lp, queries: queries.clone() }
    } else {
        encoder.encode(lp, &queries, LatentSource::Lp)?
    };
    let g = gate(&z_gt, &z_lp, params)?;
    let fused = fuse(&z_gt, &g)?;
    let norm = z_gt.values.norm();
    Ok(GateDump {
        v: crate::SCHEMA_VERSION,
        queries: queries.positions().iter().map(|p| [p.x, p.y, p.z]).collect(),
        coverage: coverage(&queries, gt, lp, encoder.radius),
        mean_gate: g.iter().sum::<f64>() / g.len().max(1) as f64,
        relative_attenuation: if norm > 0.0 { (&fused.values - &z_gt.values).norm() / norm } else { 0.0 },
        gate: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vector;
    use rand::Rng;

    fn cloud(seed: u64, n: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn empty_balls_give_zero_rows() {
        let pts = cloud(1, 100);
        let far = QuerySet::new(vec![Point::new(50.0, 0.0, 0.0); 4]);
        let z = LocalStatsEncoder::default().encode(&pts, &far, LatentSource::Gt).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert!(matches!(LocalStatsEncoder::default().encode(&[], &far, LatentSource::Gt), Err(GateError::EmptyPoints)));
    }

    #[test]
    fn features_are_translation_invariant() {
        let pts = cloud(2, 2000);
        let queries = QuerySet::from_reference(&pts, 64, 3);
        let enc = LocalStatsEncoder { radius: 0.3, d: 16 };
        let a = enc.encode(&pts, &queries, LatentSource::Gt).unwrap();
        let t = Vector::new(4.0, -8.0, 2.0);
        let moved: Vec<Point> = pts.iter().map(|p| p + t).collect();
        let moved_q = QuerySet::new(queries.positions().iter().map(|p| p + t).collect());
        let b = enc.encode(&moved, &moved_q, LatentSource::Gt).unwrap();
        assert!((a.values - b.values).amax() < 1e-9);
    }

    #[test]
    fn gate_requires_shared_queries() {
        let pts = cloud(3, 500);
        let enc = LocalStatsEncoder::default();
        let qa = QuerySet::from_reference(&pts, 16, 1);
        let qb = QuerySet::from_reference(&pts, 16, 2);
        let za = enc.encode(&pts, &qa, LatentSource::Gt).unwrap();
        let zb = enc.encode(&pts, &qb, LatentSource::Lp).unwrap();
        let params = GateParams::init(enc.d, 0);
        assert!(matches!(gate(&za, &zb, &params), Err(GateError::QueryMismatch)));
        let zb_shared = enc.encode(&pts, &qa.clone(), LatentSource::Lp).unwrap();
        assert_eq!(gate(&za, &zb_shared, &params).unwrap().len(), 16);
    }

    #[test]
    fn zero_head_is_one_half_and_bias_is_monotone() {
        let pts = cloud(4, 800);
        let enc = LocalStatsEncoder::default();
        let q = QuerySet::from_reference(&pts, 32, 0);
        let z = enc.encode(&pts, &q, LatentSource::Gt).unwrap();
        let mut params = GateParams::init(enc.d, 9);
        let before = gate(&z, &z, &params).unwrap();
        params.head_bias += 1.0;
        let after = gate(&z, &z, &params).unwrap();
        assert!(before.iter().zip(&after).all(|(b, a)| a > b));
        params.head_weight.fill(0.0);
        params.head_bias = 0.0;
        assert!(gate(&z, &z, &params).unwrap().iter().all(|&g| g == 0.5));
    }

    #[test]
    fn fuse_endpoints() {
        let pts = cloud(5, 300);
        let enc = LocalStatsEncoder::default();
        let q = QuerySet::from_reference(&pts, 8, 0);
        let z = enc.encode(&pts, &q, LatentSource::Gt).unwrap();
        assert_eq!(fuse(&z, &[0.0; 8]).unwrap().values, z.values);
        assert!(fuse(&z, &[1.0; 8]).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(fuse(&z, &[0.0; 3]).is_err());
    }
}
