//! Dense building blocks for the gate stack. Activations are row-major:
//! one row per query position.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> LayerNorm {
        LayerNorm { gamma: DVector::from_element(dim, 1.0), beta: DVector::zeros(dim) }
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        let n = x.ncols() as f64;
        for mut row in out.row_iter_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * self.gamma[j] + self.beta[j];
            }
        }
        out
    }
}

/// `y = x W^T + b` with `W` of shape `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Linear {
    /// Weights `N(0, 1/sqrt(fan_in))`, zero bias.
    pub fn init(rng: &mut impl Rng, input: usize, output: usize) -> Linear {
        let normal = Normal::new(0.0, 1.0 / (input as f64).sqrt()).expect("finite std");
        Linear {
            weight: DMatrix::from_fn(output, input, |_, _| normal.sample(rng)),
            bias: DVector::zeros(output),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Linear {
        Linear { weight: DMatrix::zeros(output, input), bias: DVector::zeros(output) }
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = x * self.weight.transpose();
        for mut row in y.row_iter_mut() {
            row += self.bias.transpose();
        }
        y
    }
}

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single-head scaled dot-product self-attention with output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
}

impl SelfAttention {
    pub fn init(rng: &mut impl Rng, dim: usize) -> SelfAttention {
        SelfAttention {
            q: Linear::init(rng, dim, dim),
            k: Linear::init(rng, dim, dim),
            v: Linear::init(rng, dim, dim),
            out: Linear::init(rng, dim, dim),
        }
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let q = self.q.forward(x);
        let k = self.k.forward(x);
        let v = self.v.forward(x);
        let scale = 1.0 / (x.ncols() as f64).sqrt();
        let mut scores = &q * k.transpose() * scale;
        for mut row in scores.row_iter_mut() {
            let max = row.max();
            row.apply(|s| *s = (*s - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        self.out.forward(&(scores * v))
    }
}

/// Two-layer GELU feed-forward block.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn init(rng: &mut impl Rng, dim: usize, hidden: usize) -> FeedForward {
        FeedForward { up: Linear::init(rng, dim, hidden), down: Linear::init(rng, hidden, dim) }
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = self.up.forward(x);
        h.apply(|v| *v = gelu(*v));
        self.down.forward(&h)
    }
}
