//! Additive white Gaussian noise at a requested SNR.
//!
//! Noise is drawn from `rand_distr::StandardNormal` over a ChaCha8 stream
//! seeded with the 64-bit seed, then scaled so that its realised power is
//! exactly `P_signal / 10^(snr/10)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{mean_square, AudioSegment, DspError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Target SNR in dB; `f64::INFINITY` means clean.
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn clean() -> Self {
        Self { snr_db: f64::INFINITY, seed: 0 }
    }
}

pub fn add_noise(seg: &AudioSegment, spec: &NoiseSpec) -> Result<AudioSegment, DspError> {
    if spec.snr_db == f64::INFINITY {
        return Ok(seg.clone());
    }
    let p_signal = seg.power();
    if p_signal == 0.0 {
        return Err(DspError::SilentSignal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw: Vec<f64> = (0..seg.samples().len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let p_raw = raw.iter().map(|v| v * v).sum::<f64>() / raw.len() as f64;
    let gain = (p_signal / 10f64.powf(spec.snr_db / 10.0) / p_raw).sqrt();
    let samples = seg.samples().iter().zip(&raw).map(|(&s, &n)| (f64::from(s) + gain * n) as f32).collect();
    AudioSegment::new(samples, seg.sample_rate_hz())
}

/// SNR of `noisy` against `clean`, from the residual power.
pub fn measured_snr_db(clean: &[f32], noisy: &[f32]) -> f64 {
    let resid: Vec<f32> = clean.iter().zip(noisy).map(|(a, b)| b - a).collect();
    10.0 * (mean_square(clean) / mean_square(&resid)).log10()
}

/// Stream seed for item `index` under `base` (SplitMix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
