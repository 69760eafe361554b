//! Fast built-in invariant checks for the `selftest` command.

use crate::nn::{read_model, write_model, ModelSpec};
use crate::numerics::{bf16_to_fp32, cordic_tanh, fp32_to_bf16, Bf16Value};
use crate::prune::{flatten_dim, prune_channels, PruneConfig};
use crate::quant::{dequantize_weights, quantize_weights, weight_scale, WeightQuantConfig};
use crate::sim::{closed_form_cycles, simulate_schedule, LayerCycleProfile, ScheduleMode};

use super::metrics::{metrics, ConfusionMatrix};

pub struct SelfCheck {
    pub name: &'static str,
    pub result: Result<(), String>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bf16_round_trip() -> Result<(), String> {
    for bits in 0..=u16::MAX {
        let v = Bf16Value::from_bits(bits);
        if v.is_nan() {
            continue;
        }
        let back = fp32_to_bf16(bf16_to_fp32(v));
        ensure(back == v, || format!("pattern {bits:#06x} came back as {:#06x}", back.to_bits()))?;
    }
    Ok(())
}

fn tanh_accuracy() -> Result<(), String> {
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let x = -4.0 + 8.0 * f64::from(i) / 999.0;
        let y = cordic_tanh(x as f32, 16).map_err(|e| e.to_string())?;
        worst = worst.max((f64::from(y) - x.tanh()).abs());
    }
    ensure(worst <= 1e-3, || format!("max error {worst}"))
}

fn timing_equivalence() -> Result<(), String> {
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut next = |m: u64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state % m
    };
    for _ in 0..100 {
        let l = 2 + next(5) as usize;
        let n: Vec<u64> = (0..l).map(|_| 1 + next(64)).collect();
        let p = LayerCycleProfile::from_macs(&n);
        for mode in [ScheduleMode::Parallel, ScheduleMode::Reusable] {
            let a = simulate_schedule(&p, mode).map_err(|e| e.to_string())?.total_cycles;
            let b = closed_form_cycles(&p, mode).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{mode} on {n:?}: simulated {a}, closed form {b}"))?;
        }
    }
    Ok(())
}

fn weight_quant() -> Result<(), String> {
    let ones = vec![1.0f32; 16];
    let k = weight_scale(&ones, 8).map_err(|e| e.to_string())?;
    ensure(k == 255.0 / 128.0, || format!("scale of ones is {k}"))?;
    let w: Vec<f32> = (0..2001).map(|i| -1.0 + i as f32 / 1000.0).collect();
    let cfg = WeightQuantConfig { bits: 8, w_lo: -1.0, w_hi: 1.0, scale: 1.0 };
    let back = dequantize_weights(&quantize_weights(&w, &cfg).map_err(|e| e.to_string())?, &cfg)
        .map_err(|e| e.to_string())?;
    let bound = 2.0 / (2.0 * 255.0);
    let worst = w.iter().zip(&back).map(|(a, b)| f64::from((a - b).abs())).fold(0.0, f64::max);
    ensure(worst <= bound + 1e-7, || format!("reconstruction error {worst} above {bound}"))
}

fn canonical_pruning() -> Result<(), String> {
    let m = ModelSpec::canonical(0).map_err(|e| e.to_string())?;
    let before = flatten_dim(&m).map_err(|e| e.to_string())?;
    let (p, _) = prune_channels(&m, &PruneConfig::flatten(8_704)).map_err(|e| e.to_string())?;
    let after = flatten_dim(&p).map_err(|e| e.to_string())?;
    ensure((before, after) == (35_072, 8_704), || format!("flatten {before} -> {after}"))
}

fn container_round_trip() -> Result<(), String> {
    let m = ModelSpec::random(&super::golden_architecture(), 1).map_err(|e| e.to_string())?;
    let bytes = write_model(&m).map_err(|e| e.to_string())?;
    let back = read_model(&bytes).map_err(|e| e.to_string())?;
    ensure(write_model(&back).map_err(|e| e.to_string())? == bytes, || "bytes differ after a round trip".into())
}

fn metric_algebra() -> Result<(), String> {
    let r = metrics(&ConfusionMatrix { tp: 9, fp: 1, fn_: 1, tn: 9 }).map_err(|e| e.to_string())?;
    ensure((r.f1 - 0.9).abs() < 1e-12 && (r.far - 0.1).abs() < 1e-12, || format!("{r:?}"))
}

fn golden_fixture() -> Result<(), String> {
    super::golden_model().map(|_| ()).map_err(|e| e.to_string())
}

pub fn selftest() -> Vec<SelfCheck> {
    let checks: [(&'static str, fn() -> Result<(), String>); 8] = [
        ("bf16 round trip", bf16_round_trip),
        ("cordic tanh accuracy", tanh_accuracy),
        ("timing closed forms", timing_equivalence),
        ("weight quantization", weight_quant),
        ("canonical pruning", canonical_pruning),
        ("model container", container_round_trip),
        ("metric algebra", metric_algebra),
        ("golden fixture", golden_fixture),
    ];
    checks.into_iter().map(|(name, f)| SelfCheck { name, result: f() }).collect()
}
