use super::{abs_percentile, levels, QuantError};

/// Clip bounds default to `±P(|w| / k)` at this percentile.
pub const CLIP_PERCENTILE: f64 = 0.999;

/// Piecewise weight quantizer: bit width, clip bounds on `w / k`, scale `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightQuantConfig {
    pub bits: u8,
    pub w_lo: f32,
    pub w_hi: f32,
    pub scale: f32,
}

impl WeightQuantConfig {
    pub fn validate(&self) -> Result<(), QuantError> {
        if !matches!(self.bits, 4 | 8 | 16) {
            return Err(QuantError::InvalidBitWidth(self.bits));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(QuantError::InvalidScale(self.scale));
        }
        if !(self.w_lo.is_finite() && self.w_hi.is_finite() && self.w_lo < self.w_hi) {
            return Err(QuantError::InvalidClipRange { lo: self.w_lo, hi: self.w_hi });
        }
        Ok(())
    }

    /// Largest code, `2^n - 1`.
    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Reconstruction step `(W_h - W_l) / (2^n - 1)`.
    pub fn step(&self) -> f64 {
        (f64::from(self.w_hi) - f64::from(self.w_lo)) / levels(self.bits)
    }

    /// Config with the given scale and symmetric bounds at the clip
    /// percentile of `|w| / scale`.
    pub fn with_scale(w: &[f32], bits: u8, scale: f32) -> Result<Self, QuantError> {
        if w.is_empty() {
            return Err(QuantError::EmptyTensor);
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(QuantError::InvalidScale(scale));
        }
        let mut bound = abs_percentile(w, CLIP_PERCENTILE) / f64::from(scale);
        if bound <= 0.0 {
            bound = abs_percentile(w, 1.0) / f64::from(scale);
        }
        if bound <= 0.0 {
            // all-zero weights: any non-degenerate range reproduces them
            bound = 1.0;
        }
        let cfg = Self { bits, w_lo: -(bound as f32), w_hi: bound as f32, scale };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scale from [`weight_scale`] plus default bounds.
    pub fn scaled(w: &[f32], bits: u8) -> Result<Self, QuantError> {
        let k = weight_scale(w, bits)?;
        Self::with_scale(w, bits, k)
    }

    /// Unit scale plus default bounds.
    pub fn nominal(w: &[f32], bits: u8) -> Result<Self, QuantError> {
        Self::with_scale(w, bits, 1.0)
    }
}

/// `k = mean(|w|) * (2^n - 1) / 2^(n-1)`.
pub fn weight_scale(w: &[f32], bits: u8) -> Result<f32, QuantError> {
    if w.is_empty() {
        return Err(QuantError::EmptyTensor);
    }
    if !(2..=16).contains(&bits) {
        return Err(QuantError::InvalidBitWidth(bits));
    }
    let mean_abs = w.iter().map(|v| f64::from(v.abs())).sum::<f64>() / w.len() as f64;
    Ok((mean_abs * levels(bits) / f64::from(1u32 << (bits - 1))) as f32)
}

/// Code of a single weight. Non-finite weights map to code 0.
#[inline]
pub fn quantize_weight(w: f32, cfg: &WeightQuantConfig) -> u32 {
    if !w.is_finite() {
        return 0;
    }
    let (lo, hi) = (f64::from(cfg.w_lo), f64::from(cfg.w_hi));
    let clipped = (f64::from(w) / f64::from(cfg.scale)).clamp(lo, hi);
    ((clipped - lo) * levels(cfg.bits) / (hi - lo)).round_ties_even() as u32
}

/// Reconstructed value of a code, in the clipped `w / k` domain.
#[inline]
pub fn reconstruct(code: u32, cfg: &WeightQuantConfig) -> f64 {
    let (lo, hi) = (f64::from(cfg.w_lo), f64::from(cfg.w_hi));
    f64::from(code) * (hi - lo) / levels(cfg.bits) + lo
}

pub fn quantize_weights(w: &[f32], cfg: &WeightQuantConfig) -> Result<Vec<u32>, QuantError> {
    cfg.validate()?;
    Ok(w.iter().map(|&v| quantize_weight(v, cfg)).collect())
}

pub fn dequantize_weights(codes: &[u32], cfg: &WeightQuantConfig) -> Result<Vec<f32>, QuantError> {
    cfg.validate()?;
    let max = cfg.max_code();
    codes
        .iter()
        .map(|&c| {
            if c > max {
                Err(QuantError::CodeOutOfRange { code: c, max })
            } else {
                Ok(reconstruct(c, cfg) as f32)
            }
        })
        .collect()
}

/// Quantize and reconstruct back in the weight domain, `k * Q(w)`.
pub fn fake_quantize(w: &[f32], cfg: &WeightQuantConfig) -> Result<Vec<f64>, QuantError> {
    cfg.validate()?;
    let k = f64::from(cfg.scale);
    Ok(w.iter().map(|&v| k * reconstruct(quantize_weight(v, cfg), cfg)).collect())
}
