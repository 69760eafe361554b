//! Acoustic front end: fixed-length segmentation, peak normalisation,
//! spectral features and seeded noise augmentation.

mod features;
mod io;
mod noise;
mod spectral;

pub use features::{extract, log_psd, mel_pooled, mfcc, zcr, FeatureKind, FeatureVector, MfccConfig};
pub use io::{
    load_features, read_features, read_wav, save_features, write_features, write_wav, FeatureSet,
    FEATURE_MAGIC, FEATURE_VERSION,
};
pub use noise::{add_noise, derive_seed, measured_snr_db, NoiseSpec};
pub use spectral::{
    dct2_ortho, dft, frame_count, hann, hz_to_mel, mel_energies, mel_to_hz, power_spectrum, FrameConfig,
    MelFilterbank, LOG_FLOOR,
};

use thiserror::Error;

use crate::format::FormatError;

/// Segment length in seconds.
pub const SEGMENT_SECONDS: f64 = 0.8;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio has {len} samples, one segment needs {need}")]
    AudioTooShort { len: usize, need: usize },
    #[error("segment has {len} samples, at least {need} are needed")]
    SegmentTooShort { len: usize, need: usize },
    #[error("signal power is zero, SNR is undefined")]
    SilentSignal,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("segment of {len} samples does not match {rate} Hz ({need} expected)")]
    BadSegmentLength { len: usize, rate: u32, need: usize },
    #[error("sample rate must be positive")]
    InvalidRate,
    #[error("sample rate {found} Hz differs from the expected {expected} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("unsupported wav: {0}")]
    UnsupportedWav(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Samples in one segment at `rate`.
pub fn segment_len(rate: u32) -> usize {
    (SEGMENT_SECONDS * f64::from(rate)).round() as usize
}

/// One fixed-length window of audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSegment {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl AudioSegment {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, DspError> {
        if sample_rate_hz == 0 {
            return Err(DspError::InvalidRate);
        }
        let need = segment_len(sample_rate_hz);
        if samples.len() != need {
            return Err(DspError::BadSegmentLength { len: samples.len(), rate: sample_rate_hz, need });
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(DspError::NonFinite { index });
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    /// Mean square of the samples.
    pub fn power(&self) -> f64 {
        mean_square(&self.samples)
    }
}

pub(crate) fn mean_square(x: &[f32]) -> f64 {
    x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() / x.len().max(1) as f64
}

/// Consecutive non-overlapping segments; a trailing partial window is
/// dropped.
pub fn segment(audio: &[f32], sample_rate_hz: u32) -> Result<Vec<AudioSegment>, DspError> {
    if sample_rate_hz == 0 {
        return Err(DspError::InvalidRate);
    }
    let need = segment_len(sample_rate_hz);
    if audio.len() < need {
        return Err(DspError::AudioTooShort { len: audio.len(), need });
    }
    audio.chunks_exact(need).map(|c| AudioSegment::new(c.to_vec(), sample_rate_hz)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormStatus {
    Scaled,
    /// All samples were zero; the segment is returned unchanged.
    SilentSegment,
}

/// Peak normalisation to `max |x| = 1`.
pub fn normalize(seg: &AudioSegment) -> (AudioSegment, NormStatus) {
    let peak = seg.samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return (seg.clone(), NormStatus::SilentSegment);
    }
    let samples = seg.samples.iter().map(|&v| v / peak).collect();
    (AudioSegment { samples, sample_rate_hz: seg.sample_rate_hz }, NormStatus::Scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmentation() {
        let audio = vec![0.1f32; 32_000];
        let segs = segment(&audio, 16_000).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.samples().len() == 12_800));
        assert_eq!(segment(&audio[..12_800], 16_000).unwrap().len(), 1);
        assert!(matches!(segment(&audio[..12_640], 16_000), Err(DspError::AudioTooShort { .. })));
    }

    #[test]
    fn peak_normalisation() {
        let mut s = vec![0.0f32; 12_800];
        s[0] = 0.5;
        s[1] = -0.25;
        let seg = AudioSegment::new(s, 16_000).unwrap();
        let (n, st) = normalize(&seg);
        assert_eq!(st, NormStatus::Scaled);
        assert_eq!(&n.samples()[..2], &[1.0, -0.5]);
        let zero = AudioSegment::new(vec![0.0; 12_800], 16_000).unwrap();
        let (z, st) = normalize(&zero);
        assert_eq!(st, NormStatus::SilentSegment);
        assert_eq!(z, zero);
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = vec![0.0f32; 12_800];
        s[7] = f32::NAN;
        assert!(matches!(AudioSegment::new(s, 16_000), Err(DspError::NonFinite { index: 7 })));
    }
}
