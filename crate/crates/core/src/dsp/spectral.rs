//! Framing, FFT power spectra, mel filterbanks and the orthonormal DCT-II.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::DspError;

/// Lower clamp applied to every log argument.
pub const LOG_FLOOR: f64 = 1e-10;

/// Frame and hop in milliseconds; the FFT size is the next power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self { frame_ms: 25.0, hop_ms: 10.0 }
    }
}

impl FrameConfig {
    pub fn frame_len(&self, rate: u32) -> usize {
        (self.frame_ms * f64::from(rate) / 1000.0).round() as usize
    }

    pub fn hop_len(&self, rate: u32) -> usize {
        ((self.hop_ms * f64::from(rate) / 1000.0).round() as usize).max(1)
    }

    pub fn nfft(&self, rate: u32) -> usize {
        self.frame_len(rate).next_power_of_two()
    }
}

pub fn frame_count(len: usize, frame: usize, hop: usize) -> usize {
    if len < frame || frame == 0 {
        0
    } else {
        1 + (len - frame) / hop
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Complex DFT of a real sequence.
pub fn dft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Windowed, zero-padded power spectra `|X_k|^2`, `k = 0..=nfft/2`, one per
/// frame.
pub fn power_spectrum(x: &[f32], rate: u32, cfg: &FrameConfig) -> Result<Vec<Vec<f64>>, DspError> {
    let frame = cfg.frame_len(rate);
    let hop = cfg.hop_len(rate);
    let nfft = cfg.nfft(rate);
    let frames = frame_count(x.len(), frame, hop);
    if frames == 0 {
        return Err(DspError::SegmentTooShort { len: x.len(), need: frame.max(1) });
    }
    let window = hann(frame);
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let start = f * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            let v = if i < frame { f64::from(x[start + i]) * window[i] } else { 0.0 };
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        out.push(buf[..=nfft / 2].iter().map(|c| c.norm_sqr()).collect());
    }
    Ok(out)
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with unit peaks, centres equally spaced on the mel
/// scale between 0 Hz and Nyquist. Adjacent triangles sum to one between the
/// first and last centre.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x (nfft/2 + 1)` weights.
    pub weights: Vec<Vec<f64>>,
    pub centres_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, nfft: usize, rate: u32) -> Self {
        let nyquist = f64::from(rate) / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect();
        let bins = nfft / 2 + 1;
        let bin_hz = f64::from(rate) / nfft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f > lo && f < c {
                            (f - lo) / (c - lo)
                        } else if f >= c && f < hi {
                            (hi - f) / (hi - c)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self { weights, centres_hz: edges[1..=n_mels].to_vec() }
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Per-frame mel filterbank energies.
pub fn mel_energies(x: &[f32], rate: u32, cfg: &FrameConfig, n_mels: usize) -> Result<Vec<Vec<f64>>, DspError> {
    let spectra = power_spectrum(x, rate, cfg)?;
    let bank = MelFilterbank::new(n_mels, cfg.nfft(rate), rate);
    Ok(spectra.iter().map(|p| bank.apply(p)).collect())
}

/// `c_k = s_k sum_n x_n cos(pi k (2n + 1) / 2N)` with `s_0 = sqrt(1/N)` and
/// `s_k = sqrt(2/N)` otherwise.
pub fn dct2_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let s = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            s * x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                .sum::<f64>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_geometry() {
        let c = FrameConfig::default();
        assert_eq!((c.frame_len(16_000), c.hop_len(16_000), c.nfft(16_000)), (400, 160, 512));
        assert_eq!(frame_count(12_800, 400, 160), 78);
    }

    #[test]
    fn mel_scale_inverts() {
        for f in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 999.985).abs() < 1e-2);
    }
}
