//! Dataset-level evaluation. Records are processed in parallel and merged by
//! index.

use rayon::prelude::*;

use super::metrics::{metrics, ConfusionMatrix, EvalReport, SnrPoint};
use super::AppError;
use crate::dsp::{add_noise, derive_seed, extract, normalize, AudioSegment, FeatureKind, FeatureSet, NoiseSpec};
use crate::format::FormatError;
use crate::nn::{argmax, ForwardOptions, ModelSpec, Tensor1D};

/// Features of each segment, in input order.
pub fn extract_features(segs: &[(AudioSegment, u8)], kind: FeatureKind) -> Result<FeatureSet, AppError> {
    let rows: Vec<(Vec<f32>, u8)> = segs
        .par_iter()
        .map(|(s, l)| extract(s, kind).map(|f| (f.values, *l)))
        .collect::<Result<_, _>>()?;
    let len = rows.first().map_or(0, |r| r.0.len());
    let mut set = FeatureSet::new(kind, len);
    for (v, l) in rows {
        set.push(v, l)?;
    }
    Ok(set)
}

/// Segments stored in a raw feature set.
pub fn segments_from_set(set: &FeatureSet, rate: u32) -> Result<Vec<(AudioSegment, u8)>, AppError> {
    if set.kind != FeatureKind::Raw {
        return Err(FormatError::Invalid(format!("expected a raw dataset, got {}", set.kind.name())).into());
    }
    set.records
        .iter()
        .map(|(v, l)| Ok((AudioSegment::new(v.clone(), rate)?, *l)))
        .collect()
}

/// Output probabilities for every record, in order.
pub fn infer_all(model: &ModelSpec, set: &FeatureSet, opts: &ForwardOptions) -> Result<Vec<Vec<f32>>, AppError> {
    let (c, l) = model.input_shape();
    if c * l != set.record_len || c != 1 {
        return Err(AppError::InputMismatch { model: (c, l), record_len: set.record_len });
    }
    set.records
        .par_iter()
        .map(|(v, _)| {
            let x = Tensor1D::from_vec(v.clone())?;
            Ok(model.forward(&x, opts)?.probs)
        })
        .collect()
}

/// Predicted classes for every record, in order.
pub fn predict(model: &ModelSpec, set: &FeatureSet, opts: &ForwardOptions) -> Result<Vec<u8>, AppError> {
    Ok(infer_all(model, set, opts)?.iter().map(|p| argmax(p) as u8).collect())
}

pub fn evaluate(model: &ModelSpec, set: &FeatureSet, opts: &ForwardOptions) -> Result<EvalReport, AppError> {
    let pred = predict(model, set, opts)?;
    metrics(&ConfusionMatrix::from_pairs(set.records.iter().map(|r| r.1).zip(pred)))
}

/// Noisy copy of each segment, peak-normalised again as the front end
/// would. Record `i` uses the noise stream `derive_seed(seed, i)`.
pub fn augment(segs: &[(AudioSegment, u8)], snr_db: f64, seed: u64) -> Result<Vec<(AudioSegment, u8)>, AppError> {
    segs.par_iter()
        .enumerate()
        .map(|(i, (s, l))| {
            let spec = NoiseSpec { snr_db, seed: derive_seed(seed, i as u64) };
            Ok((normalize(&add_noise(s, &spec)?).0, *l))
        })
        .collect()
}

/// Accuracy and error rates per SNR, using [`augment`] with the same seed
/// at every level; `f64::INFINITY` is the clean pass.
pub fn snr_sweep(
    model: &ModelSpec,
    segs: &[(AudioSegment, u8)],
    snrs: &[f64],
    seed: u64,
    kind: FeatureKind,
    opts: &ForwardOptions,
) -> Result<Vec<SnrPoint>, AppError> {
    snrs.iter()
        .map(|&snr_db| {
            let set = extract_features(&augment(segs, snr_db, seed)?, kind)?;
            Ok(SnrPoint { snr_db, report: evaluate(model, &set, opts)? })
        })
        .collect()
}
