//! Procedural two-class dataset and the frozen model fitted to it.
//!
//! UAV segments are a harmonic stack: a fundamental in 150-400 Hz and four
//! harmonics with jittered amplitudes and random phases, over a faint
//! broadband floor. Background segments are white noise through a random
//! one-pole filter, sometimes with a slow amplitude swell. Every segment is
//! peak-normalised.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dsp::{derive_seed, normalize, segment_len, AudioSegment, FeatureKind, DEFAULT_SAMPLE_RATE};
use crate::nn::{read_model, LayerSpec, ModelSpec, Padding, CANONICAL_DROPOUT};

/// Seeds used by the acceptance checks and the fitting example.
pub const GOLDEN_FIT_SEED: u64 = 0x5EED_0001;
pub const GOLDEN_EVAL_SEED: u64 = 0x5EED_0002;
pub const GOLDEN_CALIB_SEED: u64 = 0x5EED_0003;
/// Feature the golden model consumes.
pub const GOLDEN_FEATURE: FeatureKind = FeatureKind::Mel128;

fn uav(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let f0 = rng.random_range(150.0..400.0);
    let partials: Vec<(f64, f64, f64)> = (1..=5)
        .map(|h| {
            let amp = rng.random_range(0.5..1.0) / f64::from(h).sqrt();
            (f0 * f64::from(h), amp, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let floor = rng.random_range(0.01..0.05);
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let tone: f64 = partials.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum();
            let hiss: f64 = StandardNormal.sample(rng);
            tone + floor * hiss
        })
        .collect()
}

fn background(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let pole: f64 = rng.random_range(-0.6..0.97);
    let swell = rng.random_bool(0.5).then(|| rng.random_range(0.2..2.0));
    let mut y = 0.0;
    (0..n)
        .map(|i| {
            let w: f64 = StandardNormal.sample(rng);
            y = pole * y + (1.0 - pole.abs()) * w;
            let env = swell.map_or(1.0, |f| 1.0 + 0.5 * (2.0 * PI * f * i as f64 / rate).sin());
            y * env
        })
        .collect()
}

/// One labelled segment; label 1 is UAV.
pub fn synthetic_segment(seed: u64, label: u8, rate: u32) -> AudioSegment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = segment_len(rate);
    let x = if label == 1 { uav(&mut rng, n, f64::from(rate)) } else { background(&mut rng, n, f64::from(rate)) };
    let seg = AudioSegment::new(x.into_iter().map(|v| v as f32).collect(), rate).expect("finite synthetic audio");
    normalize(&seg).0
}

/// `n` segments alternating background / UAV, at 16 kHz.
pub fn synthetic_dataset(n: usize, seed: u64) -> Vec<(AudioSegment, u8)> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let label = (i % 2) as u8;
            (synthetic_segment(derive_seed(seed, i as u64), label, DEFAULT_SAMPLE_RATE), label)
        })
        .collect()
}

/// Small variant of the block architecture on a mel-128 input.
pub fn golden_architecture() -> Vec<LayerSpec> {
    let mut specs = vec![LayerSpec::Input { channels: 1, length: 128 }];
    for (i, o) in [(1, 8), (8, 16), (16, 16)] {
        specs.push(LayerSpec::Conv1D { in_ch: i, out_ch: o, padding: Padding::Valid });
        specs.push(LayerSpec::ReLU);
        specs.push(LayerSpec::MaxPool1D);
        specs.push(LayerSpec::Dropout { rate: CANONICAL_DROPOUT });
    }
    specs.extend([
        LayerSpec::Flatten,
        LayerSpec::Dense { in_dim: 16 * 14, out_dim: 16 },
        LayerSpec::ReLU,
        LayerSpec::Dense { in_dim: 16, out_dim: 2 },
        LayerSpec::Softmax,
    ]);
    specs
}

const GOLDEN_BYTES: &[u8] = include_bytes!("../../fixtures/golden.s8uv");

/// The frozen model fitted by `examples/fit_golden.rs`.
pub fn golden_model() -> Result<ModelSpec, crate::format::FormatError> {
    read_model(GOLDEN_BYTES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_reproducible_and_balanced() {
        let a = synthetic_dataset(6, 9);
        let b = synthetic_dataset(6, 9);
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|(_, l)| *l == 1).count(), 3);
        for (s, _) in &a {
            let peak = s.samples().iter().fold(0.0f32, |m, v| m.max(v.abs()));
            assert!((peak - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn golden_architecture_chains() {
        let m = ModelSpec::random(&golden_architecture(), 0).unwrap();
        assert_eq!(crate::prune::flatten_dim(&m).unwrap(), 224);
    }
}
