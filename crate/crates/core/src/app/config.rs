//! `key=value` run configuration; `#` starts a comment.

use std::path::PathBuf;

use super::AppError;
use crate::numerics::PrecisionKind;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub precision: Option<PrecisionKind>,
    pub prune_target: Option<usize>,
    pub snr: Option<Vec<f64>>,
    pub clock_hz: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// SNR list item: a number in dB or `clean`.
pub fn parse_snr(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("clean") || s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("bad SNR `{s}`"))
}

pub fn parse_snr_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_snr).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| AppError::Config { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "model" => c.model = Some(v.into()),
                "dataset" => c.dataset = Some(v.into()),
                "calibration" => c.calibration = Some(v.into()),
                "profile" => c.profile = Some(v.into()),
                "out" => c.out = Some(v.into()),
                "precision" => c.precision = Some(v.parse().map_err(err)?),
                "prune_target" => c.prune_target = Some(v.parse().map_err(|e| err(format!("prune_target: {e}")))?),
                "snr" => c.snr = Some(parse_snr_list(v).map_err(err)?),
                "clock_hz" => c.clock_hz = Some(v.parse().map_err(|e| err(format!("clock_hz: {e}")))?),
                "seed" => c.seed = Some(v.parse().map_err(|e| err(format!("seed: {e}")))?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AppError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
