//! The 1D feature CNN: layer kernels under each precision, the model
//! description, the forward engine and the binary model container.

pub mod container;
mod layer;
mod model;
pub mod ops;
mod tensor;

pub use container::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use layer::{Layer, LayerSpec, Padding, QuantParams, CANONICAL_DROPOUT, CONV_KERNEL, POOL_WINDOW};
pub use model::{
    argmax, block_architecture, model_forward, ForwardOptions, ForwardOutput, ModelSpec,
    CANONICAL_CHANNELS, CANONICAL_HIDDEN, CANONICAL_INPUT_LEN,
};
pub use ops::{
    conv1d_forward, dense_forward, dropout_inference, flatten, maxpool_forward, relu_forward,
    softmax_forward, SoftmaxImpl,
};
pub use tensor::Tensor1D;

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::quant::QuantError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length {length} is shorter than the minimum {min}")]
    LengthTooShort { length: usize, min: usize },
    #[error("invalid layer chain: {0}")]
    InvalidChain(String),
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error("layer {index}: {source}")]
    Layer { index: usize, source: Box<NnError> },
}

impl NnError {
    /// Attach a layer index unless one is already attached.
    pub fn at(self, index: usize) -> Self {
        match self {
            e @ Self::Layer { .. } => e,
            e => Self::Layer { index, source: Box::new(e) },
        }
    }

    /// The error with any layer annotation removed.
    pub fn root(&self) -> &NnError {
        match self {
            Self::Layer { source, .. } => source.root(),
            e => e,
        }
    }
}
