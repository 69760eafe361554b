//! Segment-level feature vectors. Frame-level features are mean-pooled over
//! all frames of the segment.

use super::spectral::{dct2_ortho, mel_energies, power_spectrum, FrameConfig, LOG_FLOOR};
use super::{AudioSegment, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// The segment samples themselves.
    Raw,
    Mfcc20,
    Mel128,
    LogPsd,
    Zcr,
}

impl FeatureKind {
    pub const ALL: [Self; 5] = [Self::Raw, Self::Mfcc20, Self::Mel128, Self::LogPsd, Self::Zcr];

    pub fn tag(self) -> u8 {
        match self {
            Self::Raw => 0,
            Self::Mfcc20 => 1,
            Self::Mel128 => 2,
            Self::LogPsd => 3,
            Self::Zcr => 4,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == t)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Mfcc20 => "mfcc20",
            Self::Mel128 => "mel128",
            Self::LogPsd => "logpsd",
            Self::Zcr => "zcr",
        }
    }

    /// Vector length for a segment of `len` samples at `rate`, default
    /// framing.
    pub fn len_for(self, len: usize, rate: u32) -> usize {
        match self {
            Self::Raw => len,
            Self::Mfcc20 => 20,
            Self::Mel128 => 128,
            Self::LogPsd => FrameConfig::default().nfft(rate) / 2 + 1,
            Self::Zcr => 1,
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature kind `{s}` (raw, mfcc20, mel128, logpsd, zcr)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub n_mels: usize,
    pub frames: FrameConfig,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self { n_coeffs: 20, n_mels: 40, frames: FrameConfig::default() }
    }
}

fn mean_pool(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter().map(|v| v / rows.len() as f64).collect()
}

fn to_f32(v: Vec<f64>) -> Vec<f32> {
    v.into_iter().map(|x| x as f32).collect()
}

pub fn mfcc(seg: &AudioSegment, cfg: &MfccConfig) -> Result<FeatureVector, DspError> {
    let energies = mel_energies(seg.samples(), seg.sample_rate_hz(), &cfg.frames, cfg.n_mels)?;
    let ceps: Vec<Vec<f64>> = energies
        .iter()
        .map(|e| {
            let logs: Vec<f64> = e.iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
            let mut c = dct2_ortho(&logs);
            c.truncate(cfg.n_coeffs);
            c
        })
        .collect();
    Ok(FeatureVector { kind: FeatureKind::Mfcc20, values: to_f32(mean_pool(&ceps)) })
}

/// Mean over frames of the log mel energies.
pub fn mel_pooled(seg: &AudioSegment, n_mels: usize) -> Result<FeatureVector, DspError> {
    let energies = mel_energies(seg.samples(), seg.sample_rate_hz(), &FrameConfig::default(), n_mels)?;
    let logs: Vec<Vec<f64>> = energies.iter().map(|e| e.iter().map(|v| v.max(LOG_FLOOR).ln()).collect()).collect();
    Ok(FeatureVector { kind: FeatureKind::Mel128, values: to_f32(mean_pool(&logs)) })
}

/// `log10` of the Welch-averaged one-sided power spectral density
/// (Hann frames, density scaling).
pub fn log_psd(seg: &AudioSegment) -> Result<FeatureVector, DspError> {
    let cfg = FrameConfig::default();
    let rate = seg.sample_rate_hz();
    let spectra = power_spectrum(seg.samples(), rate, &cfg)?;
    let wsum: f64 = super::hann(cfg.frame_len(rate)).iter().map(|w| w * w).sum();
    let norm = f64::from(rate) * wsum;
    let mut psd = mean_pool(&spectra);
    let last = psd.len() - 1;
    for (k, v) in psd.iter_mut().enumerate() {
        let side = if k == 0 || k == last { 1.0 } else { 2.0 };
        *v = (side * *v / norm).max(LOG_FLOOR).log10();
    }
    Ok(FeatureVector { kind: FeatureKind::LogPsd, values: to_f32(psd) })
}

/// Fraction of adjacent sample pairs whose signs strictly differ.
pub fn zcr(seg: &AudioSegment) -> Result<FeatureVector, DspError> {
    let x = seg.samples();
    if x.len() < 2 {
        return Err(DspError::SegmentTooShort { len: x.len(), need: 2 });
    }
    let crossings = x.windows(2).filter(|p| (p[0] > 0.0 && p[1] < 0.0) || (p[0] < 0.0 && p[1] > 0.0)).count();
    Ok(FeatureVector { kind: FeatureKind::Zcr, values: vec![(crossings as f64 / (x.len() - 1) as f64) as f32] })
}

pub fn extract(seg: &AudioSegment, kind: FeatureKind) -> Result<FeatureVector, DspError> {
    match kind {
        FeatureKind::Raw => Ok(FeatureVector { kind, values: seg.samples().to_vec() }),
        FeatureKind::Mfcc20 => mfcc(seg, &MfccConfig::default()),
        FeatureKind::Mel128 => mel_pooled(seg, 128),
        FeatureKind::LogPsd => log_psd(seg),
        FeatureKind::Zcr => zcr(seg),
    }
}
