use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{
    conv1d_forward, dense_forward, dropout_inference, flatten, maxpool_forward, relu_forward,
    softmax_forward, SoftmaxImpl,
};
use super::{Layer, LayerSpec, NnError, Padding, Tensor1D, CANONICAL_DROPOUT};
use crate::numerics::PrecisionKind;
use crate::quant::PrecisionMode;

/// Ordered layers, the first being [`LayerSpec::Input`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    pub softmax: SoftmaxImpl,
    /// Run every weighted layer in this precision instead of its own tag.
    pub precision_override: Option<PrecisionKind>,
    pub keep_snapshots: bool,
}

impl ForwardOptions {
    pub fn with_snapshots() -> Self {
        Self { keep_snapshots: true, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Final layer output, flattened (class probabilities for a softmax head).
    pub probs: Vec<f32>,
    /// Output of every layer, index-aligned with `ModelSpec::layers`, when
    /// requested.
    pub snapshots: Vec<Tensor1D>,
    /// Non-finite values that integer layers encoded as 0.
    pub nonfinite_encoded: usize,
}

/// Shape of the canonical network: input `1 x 1038`, three conv blocks
/// `1 -> 64 -> 128 -> 274`, flatten 35,072, dense 64, dense 2, softmax.
pub const CANONICAL_INPUT_LEN: usize = 1038;
pub const CANONICAL_CHANNELS: [usize; 3] = [64, 128, 274];
pub const CANONICAL_HIDDEN: usize = 64;

/// Conv block sequence followed by the dense head.
pub fn block_architecture(input_len: usize, channels: &[usize], hidden: usize, classes: usize) -> Vec<LayerSpec> {
    let mut specs = vec![LayerSpec::Input { channels: 1, length: input_len }];
    let mut in_ch = 1;
    let mut len = input_len;
    for &out_ch in channels {
        specs.push(LayerSpec::Conv1D { in_ch, out_ch, padding: Padding::Valid });
        specs.push(LayerSpec::ReLU);
        specs.push(LayerSpec::MaxPool1D);
        specs.push(LayerSpec::Dropout { rate: CANONICAL_DROPOUT });
        in_ch = out_ch;
        len = (len.saturating_sub(2)) / 2;
    }
    specs.push(LayerSpec::Flatten);
    specs.push(LayerSpec::Dense { in_dim: in_ch * len, out_dim: hidden });
    specs.push(LayerSpec::ReLU);
    specs.push(LayerSpec::Dense { in_dim: hidden, out_dim: classes });
    specs.push(LayerSpec::Softmax);
    specs
}

impl ModelSpec {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        let m = Self { layers };
        m.validate()?;
        Ok(m)
    }

    /// Layers from specs with uniform He-style initialisation drawn from a
    /// seeded ChaCha8 stream; biases zero.
    pub fn random(specs: &[LayerSpec], seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let mut layer = Layer::new(spec);
                let fan_in = match spec {
                    LayerSpec::Conv1D { in_ch, .. } => in_ch * 3,
                    LayerSpec::Dense { in_dim, .. } => in_dim,
                    _ => 1,
                };
                let bound = (6.0 / fan_in as f32).sqrt();
                for w in &mut layer.weights {
                    *w = rng.random_range(-bound..bound);
                }
                layer
            })
            .collect();
        Self::new(layers)
    }

    /// The canonical network with seeded random weights.
    pub fn canonical(seed: u64) -> Result<Self, NnError> {
        Self::random(
            &block_architecture(CANONICAL_INPUT_LEN, &CANONICAL_CHANNELS, CANONICAL_HIDDEN, 2),
            seed,
        )
    }

    pub fn input_shape(&self) -> (usize, usize) {
        match self.layers.first().map(|l| l.spec) {
            Some(LayerSpec::Input { channels, length }) => (channels, length),
            _ => (0, 0),
        }
    }

    /// Shape after every layer, by symbolic propagation.
    pub fn shapes(&self) -> Result<Vec<(usize, usize)>, NnError> {
        let mut shape = self.input_shape();
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                shape = l.spec.output_shape(shape).map_err(|e| e.at(i))?;
                Ok(shape)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match self.layers.first().map(|l| l.spec) {
            Some(LayerSpec::Input { .. }) => {}
            _ => return Err(NnError::InvalidChain("first layer must be the input declaration".into())),
        }
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 && matches!(l.spec, LayerSpec::Input { .. }) {
                return Err(NnError::InvalidChain(format!("layer {i}: input declaration must come first")));
            }
            l.check_params().map_err(|e| e.at(i))?;
        }
        self.shapes()?;
        Ok(())
    }

    /// Layer indices holding weights.
    pub fn weighted_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.spec.is_weighted())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn precision_map(&self) -> BTreeMap<usize, PrecisionKind> {
        self.weighted_layers().into_iter().map(|i| (i, self.layers[i].precision)).collect()
    }

    pub fn set_precision(&mut self, kind: PrecisionKind) {
        for i in self.weighted_layers() {
            self.layers[i].precision = kind;
        }
    }

    /// Index of the flatten layer.
    pub fn flatten_index(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.spec == LayerSpec::Flatten)
    }

    /// Whether the input of layer `idx` is known non-negative: some earlier
    /// layer rectifies it and only sign-preserving layers follow.
    pub fn input_is_rectified(&self, idx: usize) -> bool {
        for l in self.layers[..idx].iter().rev() {
            match l.spec {
                LayerSpec::ReLU | LayerSpec::Softmax => return true,
                LayerSpec::MaxPool1D | LayerSpec::Dropout { .. } | LayerSpec::Flatten => continue,
                _ => return false,
            }
        }
        false
    }

    /// Mode layer `idx` runs under, optionally overriding its tag.
    pub fn layer_mode(&self, idx: usize, override_kind: Option<PrecisionKind>) -> Result<PrecisionMode, NnError> {
        let layer = &self.layers[idx];
        let mut mode = layer.quant.mode(override_kind.unwrap_or(layer.precision))?;
        if let PrecisionMode::Int8 { signed_input, .. } = &mut mode {
            *signed_input = !self.input_is_rectified(idx);
        }
        Ok(mode)
    }

    pub fn layer_forward(&self, idx: usize, x: &Tensor1D, opts: &ForwardOptions) -> Result<Tensor1D, NnError> {
        let layer = &self.layers[idx];
        match layer.spec {
            LayerSpec::Input { channels, length } => {
                if x.shape() != (channels, length) {
                    return Err(NnError::ShapeMismatch(format!(
                        "model expects a {channels}x{length} input, got {}x{}",
                        x.channels(),
                        x.length()
                    )));
                }
                Ok(x.clone())
            }
            LayerSpec::Conv1D { out_ch, padding, .. } => {
                let mode = self.layer_mode(idx, opts.precision_override)?;
                conv1d_forward(x, &layer.weights, &layer.bias, out_ch, padding, &mode)
            }
            LayerSpec::Dense { .. } => {
                let mode = self.layer_mode(idx, opts.precision_override)?;
                dense_forward(x, &layer.weights, &layer.bias, &mode)
            }
            LayerSpec::ReLU => Ok(relu_forward(x)),
            LayerSpec::MaxPool1D => maxpool_forward(x),
            LayerSpec::Dropout { rate } => Ok(dropout_inference(x, rate)),
            LayerSpec::Flatten => Ok(flatten(x)),
            LayerSpec::Softmax => {
                let p = softmax_forward(x.data(), opts.softmax)?;
                Tensor1D::new(x.channels(), x.length(), p)
            }
        }
    }

    /// Run all layers in order. Errors carry the failing layer index.
    pub fn forward(&self, x: &Tensor1D, opts: &ForwardOptions) -> Result<ForwardOutput, NnError> {
        let mut snapshots = Vec::new();
        let mut nonfinite = 0;
        let mut cur = x.clone();
        for idx in 0..self.layers.len() {
            if self.layers[idx].spec.is_weighted() {
                let kind = opts.precision_override.unwrap_or(self.layers[idx].precision);
                if kind.is_integer() {
                    nonfinite += cur.data().iter().filter(|v| !v.is_finite()).count();
                }
            }
            cur = self.layer_forward(idx, &cur, opts).map_err(|e| e.at(idx))?;
            if opts.keep_snapshots {
                snapshots.push(cur.clone());
            }
        }
        Ok(ForwardOutput { probs: cur.into_data(), snapshots, nonfinite_encoded: nonfinite })
    }
}

/// Free-function form of [`ModelSpec::forward`].
pub fn model_forward(m: &ModelSpec, x: &Tensor1D, opts: &ForwardOptions) -> Result<ForwardOutput, NnError> {
    m.forward(x, opts)
}

/// Index of the largest probability; the first one wins ties.
pub fn argmax(p: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
