//! Experiment plumbing: metrics, the synthetic golden set, SNR sweeps, run
//! configuration and report files.

mod config;
mod dataset;
mod metrics;
mod pipeline;
mod report;
mod selftest;

pub use config::{parse_snr, parse_snr_list, RunConfig};
pub use dataset::{
    golden_architecture, golden_model, synthetic_dataset, synthetic_segment, GOLDEN_CALIB_SEED, GOLDEN_EVAL_SEED,
    GOLDEN_FEATURE, GOLDEN_FIT_SEED,
};
pub use metrics::{metrics, ConfusionMatrix, DegenerateDenominator, EvalReport, SnrPoint};
pub use pipeline::{augment, evaluate, extract_features, infer_all, predict, segments_from_set, snr_sweep};
pub use report::{
    curve_csv, metrics_csv, parse_cycles_json, parse_report_json, render_text, report_json, write_cycles,
    write_report,
};
pub use selftest::{selftest, SelfCheck};

use thiserror::Error;

use crate::dsp::DspError;
use crate::format::FormatError;
use crate::nn::NnError;
use crate::numerics::NumericsError;
use crate::prune::PruneError;
use crate::quant::QuantError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("model expects a {}x{} input but records hold {record_len} values", model.0, model.1)]
    InputMismatch { model: (usize, usize), record_len: usize },
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AppError {
    /// True when the failure is an internal invariant (an overflowing
    /// accumulator, a chain the code itself produced) rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        match self {
            Self::Nn(e) => matches!(e.root(), NnError::Numerics(NumericsError::AccumulatorOverflow { .. })),
            _ => false,
        }
    }
}
