use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::nn::{sigmoid, FeedForward, LayerNorm, Linear, SelfAttention};
use super::GateError;

pub const HEAD_BIAS_INIT: f64 = -4.0;
pub const HEAD_WEIGHT_STD: f64 = 1e-3;
pub const PARAMS_MAGIC: &[u8; 4] = b"GPRM";
pub const PARAMS_VERSION: u32 = 1;

/// Post-norm encoder layer: `h = LN(h + SA(h)); h = LN(h + FFN(h))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayer {
    pub attn: SelfAttention,
    pub norm1: LayerNorm,
    pub ffn: FeedForward,
    pub norm2: LayerNorm,
}

impl EncoderLayer {
    pub fn forward(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let h = self.norm1.forward(&(h + self.attn.forward(h)));
        self.norm2.forward(&(&h + self.ffn.forward(&h)))
    }
}

/// Weights of the gate network for latent width `d` (stack width `2d`).
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub d: usize,
    pub norm_gt: LayerNorm,
    pub norm_lp: LayerNorm,
    pub attn: SelfAttention,
    pub ffn_norm: LayerNorm,
    pub ffn: FeedForward,
    pub encoder: EncoderLayer,
    pub head_weight: DVector<f64>,
    pub head_bias: f64,
}

impl GateParams {
    /// Fresh parameters: head weight `N(0, 1e-3)`, head bias `-4`, every other
    /// projection `N(0, 1/sqrt(fan_in))` with zero bias, unit layer norms.
    pub fn init(d: usize, seed: u64) -> GateParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 2 * d;
        let hidden = 2 * w;
        let attn = SelfAttention::init(&mut rng, w);
        let ffn = FeedForward::init(&mut rng, w, hidden);
        let encoder = EncoderLayer {
            attn: SelfAttention::init(&mut rng, w),
            norm1: LayerNorm::new(w),
            ffn: FeedForward::init(&mut rng, w, hidden),
            norm2: LayerNorm::new(w),
        };
        let head = Normal::new(0.0, HEAD_WEIGHT_STD).expect("finite std");
        GateParams {
            d,
            norm_gt: LayerNorm::new(d),
            norm_lp: LayerNorm::new(d),
            attn,
            ffn_norm: LayerNorm::new(w),
            ffn,
            encoder,
            head_weight: DVector::from_fn(w, |_, _| head.sample(&mut rng)),
            head_bias: HEAD_BIAS_INIT,
        }
    }

    /// Pre-sigmoid head output per row. No alignment checks: callers that
    /// hold query sets should go through [`super::gate`].
    pub fn logits(&self, z_gt: &DMatrix<f64>, z_lp: &DMatrix<f64>) -> Result<DVector<f64>, GateError> {
        for z in [z_gt, z_lp] {
            if z.ncols() != self.d {
                return Err(GateError::WidthMismatch { expected: self.d, got: z.ncols() });
            }
        }
        if z_gt.nrows() != z_lp.nrows() {
            return Err(GateError::RowMismatch { gt: z_gt.nrows(), lp: z_lp.nrows() });
        }
        let a = self.norm_gt.forward(z_gt);
        let b = self.norm_lp.forward(z_lp);
        let mut h = DMatrix::zeros(a.nrows(), 2 * self.d);
        h.columns_mut(0, self.d).copy_from(&a);
        h.columns_mut(self.d, self.d).copy_from(&b);
        let h = &h + self.attn.forward(&h);
        let h = &h + self.ffn.forward(&self.ffn_norm.forward(&h));
        let h = self.encoder.forward(&h);
        Ok(h * &self.head_weight + DVector::from_element(a.nrows(), self.head_bias))
    }

    /// `sigmoid(logits)` per row.
    pub fn forward(&self, z_gt: &DMatrix<f64>, z_lp: &DMatrix<f64>) -> Result<Vec<f64>, GateError> {
        Ok(self.logits(z_gt, z_lp)?.iter().map(|&x| sigmoid(x)).collect())
    }

    fn tensors(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        let mut vec = |name: &str, v: &DVector<f64>| out.push((name.to_string(), vec![v.len()], v.as_slice().to_vec()));
        vec("norm_gt.gamma", &self.norm_gt.gamma);
        vec("norm_gt.beta", &self.norm_gt.beta);
        vec("norm_lp.gamma", &self.norm_lp.gamma);
        vec("norm_lp.beta", &self.norm_lp.beta);
        vec("ffn_norm.gamma", &self.ffn_norm.gamma);
        vec("ffn_norm.beta", &self.ffn_norm.beta);
        vec("encoder.norm1.gamma", &self.encoder.norm1.gamma);
        vec("encoder.norm1.beta", &self.encoder.norm1.beta);
        vec("encoder.norm2.gamma", &self.encoder.norm2.gamma);
        vec("encoder.norm2.beta", &self.encoder.norm2.beta);
        vec("head.weight", &self.head_weight);
        vec("head.bias", &DVector::from_element(1, self.head_bias));
        for (prefix, lin) in self.linears() {
            let rows: Vec<f64> = lin.weight.transpose().as_slice().to_vec();
            out.push((format!("{prefix}.weight"), vec![lin.weight.nrows(), lin.weight.ncols()], rows));
            out.push((format!("{prefix}.bias"), vec![lin.bias.len()], lin.bias.as_slice().to_vec()));
        }
        out
    }

    fn linears(&self) -> Vec<(&'static str, &Linear)> {
        vec![
            ("attn.q", &self.attn.q),
            ("attn.k", &self.attn.k),
            ("attn.v", &self.attn.v),
            ("attn.out", &self.attn.out),
            ("ffn.up", &self.ffn.up),
            ("ffn.down", &self.ffn.down),
            ("encoder.attn.q", &self.encoder.attn.q),
            ("encoder.attn.k", &self.encoder.attn.k),
            ("encoder.attn.v", &self.encoder.attn.v),
            ("encoder.attn.out", &self.encoder.attn.out),
            ("encoder.ffn.up", &self.encoder.ffn.up),
            ("encoder.ffn.down", &self.encoder.ffn.down),
        ]
    }

    fn linears_mut(&mut self) -> Vec<(&'static str, &mut Linear)> {
        vec![
            ("attn.q", &mut self.attn.q),
            ("attn.k", &mut self.attn.k),
            ("attn.v", &mut self.attn.v),
            ("attn.out", &mut self.attn.out),
            ("ffn.up", &mut self.ffn.up),
            ("ffn.down", &mut self.ffn.down),
            ("encoder.attn.q", &mut self.encoder.attn.q),
            ("encoder.attn.k", &mut self.encoder.attn.k),
            ("encoder.attn.v", &mut self.encoder.attn.v),
            ("encoder.attn.out", &mut self.encoder.attn.out),
            ("encoder.ffn.up", &mut self.encoder.ffn.up),
            ("encoder.ffn.down", &mut self.encoder.ffn.down),
        ]
    }

    /// Named-tensor container; see `docs/formats.md`.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), GateError> {
        let tensors = self.tensors();
        let mut buf = Vec::new();
        buf.extend_from_slice(PARAMS_MAGIC);
        buf.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
        buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in &tensors {
            buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.push(shape.len() as u8);
            for &s in shape {
                buf.extend_from_slice(&(s as u32).to_le_bytes());
            }
            for x in data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<GateParams, GateError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != PARAMS_MAGIC {
            return Err(GateError::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != PARAMS_VERSION {
            return Err(GateError::Format(format!("unsupported version {version}")));
        }
        let count = cur.u32()? as usize;
        let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
        for _ in 0..count {
            let len = u16::from_le_bytes(cur.take(2)?.try_into().expect("2 bytes")) as usize;
            let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| GateError::Format("bad tensor name".into()))?;
            let ndim = cur.take(1)?[0] as usize;
            let shape: Vec<usize> = (0..ndim).map(|_| cur.u32().map(|s| s as usize)).collect::<Result<_, _>>()?;
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| cur.take(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))))
                .collect::<Result<_, _>>()?;
            tensors.insert(name, (shape, data));
        }
        let head = tensors.get("head.weight").ok_or_else(|| GateError::Format("missing head.weight".into()))?;
        let w = head.0[0];
        if w == 0 || w % 2 != 0 {
            return Err(GateError::Format(format!("head width {w} is not 2d")));
        }
        let mut params = GateParams::init(w / 2, 0);
        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f64>, GateError> {
            let (s, data) = tensors.remove(name).ok_or_else(|| GateError::Format(format!("missing tensor {name}")))?;
            if s != shape {
                return Err(GateError::Format(format!("tensor {name} has shape {s:?}, expected {shape:?}")));
            }
            Ok(data)
        };
        let d = params.d;
        let vector = |data: Vec<f64>| DVector::from_vec(data);
        params.norm_gt.gamma = vector(take("norm_gt.gamma", &[d])?);
        params.norm_gt.beta = vector(take("norm_gt.beta", &[d])?);
        params.norm_lp.gamma = vector(take("norm_lp.gamma", &[d])?);
        params.norm_lp.beta = vector(take("norm_lp.beta", &[d])?);
        params.ffn_norm.gamma = vector(take("ffn_norm.gamma", &[w])?);
        params.ffn_norm.beta = vector(take("ffn_norm.beta", &[w])?);
        params.encoder.norm1.gamma = vector(take("encoder.norm1.gamma", &[w])?);
        params.encoder.norm1.beta = vector(take("encoder.norm1.beta", &[w])?);
        params.encoder.norm2.gamma = vector(take("encoder.norm2.gamma", &[w])?);
        params.encoder.norm2.beta = vector(take("encoder.norm2.beta", &[w])?);
        params.head_weight = vector(take("head.weight", &[w])?);
        params.head_bias = take("head.bias", &[1])?[0];
        for (prefix, lin) in params.linears_mut() {
            let (rows, cols) = lin.weight.shape();
            lin.weight = DMatrix::from_row_slice(rows, cols, &take(&format!("{prefix}.weight"), &[rows, cols])?);
            lin.bias = vector(take(&format!("{prefix}.bias"), &[rows])?);
        }
        if let Some(extra) = tensors.keys().next() {
            return Err(GateError::Format(format!("unexpected tensor {extra}")));
        }
        Ok(params)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GateError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| GateError::Format("truncated parameter file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, GateError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip() {
        let params = GateParams::init(4, 17);
        let mut buf = Vec::new();
        params.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GPRM");
        assert_eq!(GateParams::read_from(&buf[..]).unwrap(), params);
        assert!(GateParams::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn init_statistics() {
        let params = GateParams::init(32, 5);
        assert_eq!(params.head_bias, -4.0);
        let w = &params.head_weight;
        let std = (w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64).sqrt();
        assert!(std > 5e-4 && std < 2e-3, "head std {std}");
        let q = &params.attn.q.weight;
        let qstd = (q.iter().map(|x| x * x).sum::<f64>() / q.len() as f64).sqrt();
        assert!((qstd - 1.0 / 8.0).abs() < 0.02, "q std {qstd}");
    }
}
