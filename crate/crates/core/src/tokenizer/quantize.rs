use log::warn;
use serde::{Deserialize, Serialize};

use super::{Token, TokenError};
use crate::Point;

/// Uniform per-axis quantization of `[lo, hi]` into `bins` levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub bins: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Default for QuantizationSpec {
    fn default() -> Self {
        QuantizationSpec { bins: 256, lo: -0.5, hi: 0.5 }
    }
}

/// Reserved ids directly above the coordinate vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentinels {
    pub s_ctx: Token,
    pub e_ctx: Token,
    pub eos: Token,
}

impl QuantizationSpec {
    pub fn with_bins(bins: u32) -> QuantizationSpec {
        QuantizationSpec { bins, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), TokenError> {
        // sentinels must still fit the u16 wire format
        if self.bins < 2 || self.bins > u16::MAX as u32 - 3 {
            return Err(TokenError::BadSpec(format!("bins must be in 2..={}, got {}", u16::MAX - 3, self.bins)));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(TokenError::BadSpec(format!("empty domain [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn sentinels(&self) -> Sentinels {
        Sentinels { s_ctx: self.bins, e_ctx: self.bins + 1, eos: self.bins + 2 }
    }

    pub fn vocab_size(&self) -> u32 {
        self.bins + 3
    }

    /// Token of one coordinate plus whether it had to be clamped.
    pub fn quantize_clamped(&self, coord: f64) -> Result<(Token, bool), TokenError> {
        if coord.is_nan() {
            return Err(TokenError::NanCoordinate);
        }
        let t = ((coord - self.lo) / (self.hi - self.lo) * self.bins as f64).floor();
        let max = (self.bins - 1) as f64;
        let clamped = !(0.0..=max).contains(&t);
        let outside = coord < self.lo || coord > self.hi;
        Ok((t.clamp(0.0, max) as Token, clamped && outside))
    }

    /// `floor((c - lo) / (hi - lo) * bins)` clamped to the valid range; warns
    /// when the coordinate lies outside the domain.
    pub fn quantize(&self, coord: f64) -> Result<Token, TokenError> {
        let (t, clamped) = self.quantize_clamped(coord)?;
        if clamped {
            warn!("coordinate {coord} outside quantization domain [{}, {}]; clamped", self.lo, self.hi);
        }
        Ok(t)
    }

    /// Bin centre.
    pub fn dequantize(&self, token: Token) -> f64 {
        self.lo + (token as f64 + 0.5) * self.bin_width()
    }

    /// Tokens of a point in x, y, z order; warns once if any axis was clamped.
    pub fn quantize_point(&self, p: &Point) -> Result<[Token; 3], TokenError> {
        let mut out = [0; 3];
        let mut clamped = false;
        for k in 0..3 {
            let (t, c) = self.quantize_clamped(p[k])?;
            out[k] = t;
            clamped |= c;
        }
        if clamped {
            warn!("point {p} outside quantization domain; clamped");
        }
        Ok(out)
    }

    pub fn dequantize_point(&self, t: &[Token; 3]) -> Point {
        Point::new(self.dequantize(t[0]), self.dequantize(t[1]), self.dequantize(t[2]))
    }

    /// Snaps every vertex to its bin centre.
    pub fn snap_point(&self, p: &Point) -> Result<Point, TokenError> {
        Ok(self.dequantize_point(&self.quantize_point(p)?))
    }
}
