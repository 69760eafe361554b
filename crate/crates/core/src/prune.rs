//! Structured channel pruning of the last convolution before the flatten,
//! with the matching input columns removed from the first dense layer.

use thiserror::Error;

use crate::nn::{LayerSpec, ModelSpec, NnError, CONV_KERNEL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PruneError {
    #[error("target {target} is not reachable: {reason}")]
    TargetUnachievable { target: usize, reason: String },
    #[error("model has no flatten layer")]
    NoFlattenLayer,
    #[error("empty weight tensor")]
    EmptyTensor,
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneTarget {
    /// Desired flatten dimension; must be a multiple of the temporal length.
    Flatten(usize),
    Channels(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Importance {
    #[default]
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneConfig {
    pub target: PruneTarget,
    pub importance: Importance,
}

impl PruneConfig {
    pub fn flatten(target: usize) -> Self {
        Self { target: PruneTarget::Flatten(target), importance: Importance::L1 }
    }

    pub fn channels(target: usize) -> Self {
        Self { target: PruneTarget::Channels(target), importance: Importance::L1 }
    }
}

/// One score per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImportance {
    pub scores: Vec<f64>,
}

/// Removed channels with their scores, ascending by channel index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PruneRecord {
    pub removed: Vec<(usize, f64)>,
}

impl PruneRecord {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.removed.iter().map(|(c, s)| format!("{c} {s}\n")).collect()
    }
}

/// L1 norm of each filter of a conv weight tensor laid out `[out][in][3]`.
pub fn channel_importance(w: &[f32], out_ch: usize) -> Result<ChannelImportance, PruneError> {
    if w.is_empty() || out_ch == 0 {
        return Err(PruneError::EmptyTensor);
    }
    if !w.len().is_multiple_of(out_ch * CONV_KERNEL) {
        return Err(NnError::ShapeMismatch(format!("{} weights do not split into {out_ch} filters", w.len())).into());
    }
    let per = w.len() / out_ch;
    Ok(ChannelImportance {
        scores: w.chunks(per).map(|f| f.iter().map(|&v| f64::from(v.abs())).sum()).collect(),
    })
}

/// Channels times temporal length at the flatten layer.
pub fn flatten_dim(m: &ModelSpec) -> Result<usize, PruneError> {
    let idx = m.flatten_index().ok_or(PruneError::NoFlattenLayer)?;
    let (_, len) = m.shapes()?[idx];
    Ok(len)
}

/// Indices of the conv feeding the flatten and of the first dense after it.
fn prune_sites(m: &ModelSpec) -> Result<(usize, usize, usize), PruneError> {
    let flat = m.flatten_index().ok_or(PruneError::NoFlattenLayer)?;
    let conv = (0..flat)
        .rev()
        .find(|&i| m.layers[i].spec.is_weighted() || matches!(m.layers[i].spec, LayerSpec::Input { .. }))
        .filter(|&i| matches!(m.layers[i].spec, LayerSpec::Conv1D { .. }))
        .ok_or_else(|| NnError::InvalidChain("no convolution feeds the flatten".into()))?;
    let dense = (flat + 1..m.layers.len())
        .find(|&i| m.layers[i].spec.is_weighted())
        .filter(|&i| matches!(m.layers[i].spec, LayerSpec::Dense { .. }))
        .ok_or_else(|| NnError::InvalidChain("no dense layer follows the flatten".into()))?;
    Ok((conv, flat, dense))
}

/// Remove the least important channels of the conv feeding the flatten.
/// Ties prune the higher channel index first. `m` is left untouched.
pub fn prune_channels(m: &ModelSpec, cfg: &PruneConfig) -> Result<(ModelSpec, PruneRecord), PruneError> {
    m.validate()?;
    let (conv, flat, dense) = prune_sites(m)?;
    let LayerSpec::Conv1D { in_ch, out_ch, padding } = m.layers[conv].spec else { unreachable!() };
    let shapes = m.shapes()?;
    let (channels, temporal) = shapes[flat - 1];
    debug_assert_eq!(channels, out_ch);
    let keep_n = match cfg.target {
        PruneTarget::Channels(c) => c,
        PruneTarget::Flatten(f) => {
            if f % temporal != 0 {
                return Err(PruneError::TargetUnachievable {
                    target: f,
                    reason: format!("not a multiple of the temporal length {temporal}"),
                });
            }
            f / temporal
        }
    };
    let target = match cfg.target {
        PruneTarget::Channels(c) | PruneTarget::Flatten(c) => c,
    };
    if keep_n == 0 || keep_n > out_ch {
        return Err(PruneError::TargetUnachievable {
            target,
            reason: format!("needs {keep_n} channels, layer has {out_ch}"),
        });
    }
    if keep_n == out_ch {
        return Ok((m.clone(), PruneRecord::default()));
    }

    let imp = match cfg.importance {
        Importance::L1 => channel_importance(&m.layers[conv].weights, out_ch)?,
    };
    let mut order: Vec<usize> = (0..out_ch).collect();
    order.sort_by(|&a, &b| imp.scores[a].total_cmp(&imp.scores[b]).then(b.cmp(&a)));
    let mut removed: Vec<usize> = order[..out_ch - keep_n].to_vec();
    removed.sort_unstable();
    let mut keep = vec![true; out_ch];
    for &c in &removed {
        keep[c] = false;
    }

    let mut out = m.clone();
    let per = in_ch * CONV_KERNEL;
    let cl = &mut out.layers[conv];
    cl.spec = LayerSpec::Conv1D { in_ch, out_ch: keep_n, padding };
    cl.weights = m.layers[conv].weights.chunks(per).zip(&keep).filter(|(_, &k)| k).flat_map(|(r, _)| r.to_vec()).collect();
    cl.bias = m.layers[conv].bias.iter().zip(&keep).filter(|(_, &k)| k).map(|(&b, _)| b).collect();

    let LayerSpec::Dense { in_dim, out_dim } = m.layers[dense].spec else { unreachable!() };
    let mut cols = Vec::with_capacity(keep_n * temporal);
    for c in (0..out_ch).filter(|&c| keep[c]) {
        cols.extend(c * temporal..(c + 1) * temporal);
    }
    let dl = &mut out.layers[dense];
    dl.spec = LayerSpec::Dense { in_dim: cols.len(), out_dim };
    dl.weights = m.layers[dense]
        .weights
        .chunks(in_dim)
        .flat_map(|row| cols.iter().map(move |&j| row[j]))
        .collect();
    out.validate()?;
    let record = PruneRecord { removed: removed.into_iter().map(|c| (c, imp.scores[c])).collect() };
    Ok((out, record))
}
