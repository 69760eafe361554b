//! Fits the frozen golden model: random search over initialisation seeds of
//! the small architecture, each with a ridge-regression readout on the last
//! hidden layer, keeping the seed with the best training accuracy.
//!
//! cargo run --release -p uavaccel --example fit_golden -- [out.s8uv]

use nalgebra::{DMatrix, DVector};
use uavaccel::app::{
    augment, evaluate, extract_features, golden_architecture, synthetic_dataset, GOLDEN_CALIB_SEED, GOLDEN_EVAL_SEED,
    GOLDEN_FEATURE, GOLDEN_FIT_SEED,
};
use uavaccel::dsp::FeatureSet;
use uavaccel::nn::{save_model, ForwardOptions, ModelSpec, Tensor1D};
use uavaccel::numerics::PrecisionKind;
use uavaccel::quant::calibrate_uniform;

const SEEDS: u64 = 64;
const RIDGE: f64 = 1e-3;
const TRAIN_SNRS: [f64; 4] = [20.0, 10.0, 0.0, -5.0];

fn hidden(m: &ModelSpec, set: &FeatureSet, layer: usize) -> Vec<Vec<f64>> {
    set.records
        .iter()
        .map(|(v, _)| {
            let out = m.forward(&Tensor1D::from_vec(v.clone()).unwrap(), &ForwardOptions::with_snapshots()).unwrap();
            out.snapshots[layer].data().iter().map(|&x| f64::from(x)).collect()
        })
        .collect()
}

/// Readout `d = w.h + b` fitted to +-1 targets; returns (w, b, train accuracy).
fn fit_readout(h: &[Vec<f64>], labels: &[u8]) -> (Vec<f64>, f64, f64) {
    let dim = h[0].len() + 1;
    let x = DMatrix::from_fn(h.len(), dim, |r, c| if c + 1 == dim { 1.0 } else { h[r][c] });
    let t = DVector::from_iterator(labels.len(), labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }));
    let a = x.transpose() * &x + DMatrix::identity(dim, dim) * RIDGE;
    let sol = a.cholesky().expect("ridge system is positive definite").solve(&(x.transpose() * t));
    let pred = &x * &sol;
    let correct = pred.iter().zip(labels).filter(|(p, &l)| (**p > 0.0) == (l == 1)).count();
    (sol.as_slice()[..dim - 1].to_vec(), sol[dim - 1], correct as f64 / labels.len() as f64)
}

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures/golden.s8uv".into());
    // clean segments plus noisy copies across the SNR range
    let clean = synthetic_dataset(600, GOLDEN_FIT_SEED);
    let mut segs = clean.clone();
    for (i, snr) in TRAIN_SNRS.iter().enumerate() {
        segs.extend(augment(&clean, *snr, GOLDEN_FIT_SEED + 1 + i as u64).unwrap());
    }
    let train = extract_features(&segs, GOLDEN_FEATURE).unwrap();
    let labels: Vec<u8> = train.records.iter().map(|r| r.1).collect();
    let specs = golden_architecture();
    let dense1_relu = specs.len() - 3;
    let head = specs.len() - 2;

    let mut best: Option<(f64, ModelSpec)> = None;
    for seed in 0..SEEDS {
        let mut m = ModelSpec::random(&specs, seed).unwrap();
        let h = hidden(&m, &train, dense1_relu);
        let (w, b, acc) = fit_readout(&h, &labels);
        // logits (-d/2, d/2) so the class-1 probability is sigmoid(d)
        let gain = 4.0;
        let layer = &mut m.layers[head];
        let n = w.len();
        for (j, &wj) in w.iter().enumerate() {
            layer.weights[j] = (-0.5 * gain * wj) as f32;
            layer.weights[n + j] = (0.5 * gain * wj) as f32;
        }
        layer.bias = vec![(-0.5 * gain * b) as f32, (0.5 * gain * b) as f32];
        println!("seed {seed:>3}: train accuracy {acc:.4}");
        if best.as_ref().is_none_or(|(a, _)| acc > *a) {
            best = Some((acc, m));
        }
    }
    let (acc, m) = best.unwrap();
    println!("best train accuracy {acc:.4}");

    let eval = extract_features(&synthetic_dataset(400, GOLDEN_EVAL_SEED), GOLDEN_FEATURE).unwrap();
    let calib: Vec<Tensor1D> = extract_features(&synthetic_dataset(64, GOLDEN_CALIB_SEED), GOLDEN_FEATURE)
        .unwrap()
        .records
        .into_iter()
        .map(|(v, _)| Tensor1D::from_vec(v).unwrap())
        .collect();
    for kind in PrecisionKind::ALL {
        let q = if kind.is_integer() { calibrate_uniform(&m, &calib, kind).unwrap() } else { m.clone() };
        let opts = ForwardOptions { precision_override: Some(kind), ..Default::default() };
        println!("{kind}: eval accuracy {:.4}", evaluate(&q, &eval, &opts).unwrap().accuracy);
    }
    save_model(&m, &out).unwrap();
    println!("wrote {out}");
}
