//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavaccel::app::{
    evaluate, extract_features, golden_model, metrics_csv, report_json, snr_sweep, synthetic_dataset, write_report,
    GOLDEN_CALIB_SEED, GOLDEN_EVAL_SEED, GOLDEN_FEATURE,
};
use uavaccel::dsp::{
    add_noise, measured_snr_db, read_features, write_features, AudioSegment, FeatureSet, NoiseSpec,
};
use uavaccel::format::FormatError;
use uavaccel::nn::{
    conv1d_forward, dense_forward, read_model, write_model, ForwardOptions, ModelSpec, Padding, Tensor1D,
};
use uavaccel::numerics::{cordic_tanh, fp32_to_bf16, fxp8_encode, Bf16Value, Fxp8Format, PrecisionKind};
use uavaccel::prune::{flatten_dim, prune_channels, PruneConfig};
use uavaccel::quant::{
    calibrate_uniform, dequantize_weights, pact_clip, pact_quantize, quantize_signed_activation, quantize_weight,
    quantize_weights, reconstruct, weight_scale, PactParams, PrecisionMode, WeightQuantConfig,
};
use uavaccel::sim::{
    closed_form_cycles, profile_from_model, simulate_schedule, LayerCycleProfile, Regime, ScheduleMode,
    MAC_BANK_WIDTH,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Instant, limit: Duration) -> Result<(), String> {
    let e = t.elapsed();
    check(e < limit, || format!("took {e:?}, limit {limit:?}"))
}

fn timing_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let l = rng.random_range(2..=6);
        let n: Vec<u64> = (0..l).map(|_| rng.random_range(1..=64)).collect();
        let p = LayerCycleProfile::from_macs(&n);
        let sum_all: u64 = n.iter().sum();
        let sum_head: u64 = n[..l - 1].iter().sum();
        for (mode, formula) in
            [(ScheduleMode::Parallel, sum_head + l as u64 - 1), (ScheduleMode::Reusable, sum_all + 2 * l as u64 - 3)]
        {
            let sim = simulate_schedule(&p, mode).map_err(|e| e.to_string())?.total_cycles;
            let closed = closed_form_cycles(&p, mode).map_err(|e| e.to_string())?;
            check(sim == formula && closed == formula, || format!("{mode} {n:?}: sim {sim}, closed {closed}, formula {formula}"))?;
        }
    }
    within(t, Duration::from_secs(1))?;
    Ok("100 profiles, both modes exact".into())
}

fn pruning_numbers() -> Outcome {
    let m = ModelSpec::canonical(0).map_err(|e| e.to_string())?;
    let (p, rec) = prune_channels(&m, &PruneConfig::flatten(8_704)).map_err(|e| e.to_string())?;
    let (before, after) = (flatten_dim(&m).map_err(|e| e.to_string())?, flatten_dim(&p).map_err(|e| e.to_string())?);
    check((before, after) == (35_072, 8_704), || format!("flatten {before} -> {after}"))?;
    check(rec.removed.len() == 206, || format!("{} channels removed", rec.removed.len()))?;
    let dense_serial = |m: &ModelSpec| -> Result<u64, String> {
        let prof = profile_from_model(m, Regime::Full, MAC_BANK_WIDTH).map_err(|e| e.to_string())?;
        let r = simulate_schedule(&prof, ScheduleMode::Reusable).map_err(|e| e.to_string())?;
        Ok(r.layers[3].serial_cycles)
    };
    let (a, b) = (dense_serial(&m)?, dense_serial(&p)?);
    check((a, b) == (35_072, 8_704), || format!("dense serial cycles {a} -> {b}"))?;
    let reduction = 100.0 * (1.0 - b as f64 / a as f64);
    check((reduction - 75.2).abs() < 0.05, || format!("reduction {reduction:.2}%"))?;
    Ok(format!("flatten 35072 -> 8704, dense serial cycles {a} -> {b} ({reduction:.1}% fewer)"))
}

fn quantization_math() -> Outcome {
    let t = Instant::now();
    let k = weight_scale(&[1.0f32; 64], 8).map_err(|e| e.to_string())?;
    check(k == 255.0 / 128.0, || format!("scale of all-ones tensor {k}"))?;

    for alpha in [0.5f32, 1.0, 2.75] {
        for i in 0..=10_000 {
            let x = -2.0 * alpha + 4.0 * alpha * i as f32 / 10_000.0;
            let got = pact_clip(x, alpha).map_err(|e| e.to_string())?;
            let minmax = x.max(0.0).min(alpha);
            let (xd, ad) = (f64::from(x), f64::from(alpha));
            let absform = (0.5 * (xd.abs() - (xd - ad).abs() + ad)) as f32;
            check(got.to_bits() == minmax.to_bits() && got == absform, || format!("alpha {alpha}, x {x}: {got}"))?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for bits in [4u8, 8, 16] {
        let (lo, hi) = (-0.8f32, 1.3f32);
        let cfg = WeightQuantConfig { bits, w_lo: lo, w_hi: hi, scale: 1.0 };
        let w: Vec<f32> = (0..100_000).map(|_| rng.random_range(lo..=hi)).collect();
        let codes = quantize_weights(&w, &cfg).map_err(|e| e.to_string())?;
        let bound = (f64::from(hi) - f64::from(lo)) / (2.0 * ((1u64 << bits) - 1) as f64);
        let worst = w
            .iter()
            .zip(&codes)
            .map(|(a, &c)| (f64::from(*a) - reconstruct(c, &cfg)).abs())
            .fold(0.0, f64::max);
        check(worst <= bound, || format!("{bits}-bit error {worst} > {bound}"))?;
        let back = dequantize_weights(&codes, &cfg).map_err(|e| e.to_string())?;
        check(back.iter().zip(&codes).all(|(b, &c)| *b == reconstruct(c, &cfg) as f32), || "dequantize differs from the exact level".into())?;
    }
    within(t, Duration::from_secs(5))?;
    Ok("scale 255/128, 10001-point clip grid, 1e5-weight reconstruction bound".into())
}

/// INT8 reference: codes from the scalar quantizers, i64 accumulation of
/// `(c_w - 128) * c_x`, then `y = k dw dx acc + k (W_l + 128 dw) dx S_x + b`.
fn int8_reference(patch_codes: &[i64], w_codes: &[i64], wcfg: &WeightQuantConfig, alpha: f32, signed: bool, b: f32) -> f32 {
    let acc: i64 = w_codes.iter().zip(patch_codes).map(|(w, x)| (w - 128) * x).sum();
    let sx: i64 = patch_codes.iter().sum();
    let k = f64::from(wcfg.scale);
    let dw = (f64::from(wcfg.w_hi) - f64::from(wcfg.w_lo)) / 255.0;
    let dx = f64::from(alpha) / if signed { 127.0 } else { 255.0 };
    let a_dx = k * dw * dx;
    let c_dx = k * (f64::from(wcfg.w_lo) + 128.0 * dw) * dx;
    (a_dx * acc as f64 + c_dx * sx as f64 + f64::from(b)) as f32
}

fn fxp8_reference(patch: &[i64], w: &[i64], k: f32, f: u8, b: f32) -> f32 {
    let acc: i64 = w.iter().zip(patch).map(|(a, x)| a * x).sum();
    (f64::from(k) * (acc as f64 * (-2.0 * f64::from(f)).exp2()) + f64::from(b)) as f32
}

fn bit_exact_integer_paths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut compared = 0usize;
    for case in 0..50 {
        let in_ch = rng.random_range(1..=4);
        let len = rng.random_range(3..=24);
        let out_ch = rng.random_range(1..=5);
        let padding = if rng.random_bool(0.5) { Padding::Valid } else { Padding::Same };
        let signed = rng.random_bool(0.5);
        let xlo = if signed { -2.0 } else { 0.0 };
        let x: Vec<f32> = (0..in_ch * len).map(|_| rng.random_range(xlo..2.0)).collect();
        let w: Vec<f32> = (0..out_ch * in_ch * 3).map(|_| rng.random_range(-0.7..0.7)).collect();
        let b: Vec<f32> = (0..out_ch).map(|_| rng.random_range(-0.2..0.2)).collect();
        let alpha = rng.random_range(0.5f32..2.0);
        let wcfg = WeightQuantConfig::scaled(&w, 8).map_err(|e| e.to_string())?;
        let act = PactParams::new(alpha, 8).map_err(|e| e.to_string())?;
        let format = Fxp8Format::new(rng.random_range(4..=6)).map_err(|e| e.to_string())?;
        let kf = rng.random_range(0.3f32..1.0);
        let modes = [
            PrecisionMode::Int8 { weights: wcfg, act, signed_input: signed },
            PrecisionMode::Fxp8 { format, weight_scale: kf },
        ];
        let xt = Tensor1D::new(in_ch, len, x.clone()).map_err(|e| e.to_string())?;
        let flat = Tensor1D::from_vec(x.clone()).map_err(|e| e.to_string())?;
        let dense_w: Vec<f32> = (0..out_ch * in_ch * len).map(|_| rng.random_range(-0.3..0.3)).collect();
        let dense_cfg = WeightQuantConfig::scaled(&dense_w, 8).map_err(|e| e.to_string())?;

        for (mi, mode) in modes.iter().enumerate() {
            let xcode = |v: f32| -> i64 {
                match mi {
                    0 if signed => i64::from(quantize_signed_activation(v, &act).unwrap()),
                    0 => i64::from(pact_quantize(v, &act).unwrap().0),
                    _ => i64::from(fxp8_encode(v, format)),
                }
            };
            let wcode = |v: f32, cfg: &WeightQuantConfig| -> i64 {
                if mi == 0 {
                    i64::from(quantize_weight(v, cfg))
                } else {
                    i64::from(fxp8_encode((f64::from(v) / f64::from(kf)) as f32, format))
                }
            };
            let reference = |patch: &[i64], wc: &[i64], cfg: &WeightQuantConfig, bias: f32| {
                if mi == 0 {
                    int8_reference(patch, wc, cfg, alpha, signed, bias)
                } else {
                    fxp8_reference(patch, wc, kf, format.frac_bits(), bias)
                }
            };

            let y = conv1d_forward(&xt, &w, &b, out_ch, padding, mode).map_err(|e| e.to_string())?;
            let wc: Vec<i64> = w.iter().map(|&v| wcode(v, &wcfg)).collect();
            let (lead, out_len) = if padding == Padding::Valid { (0, len - 2) } else { (1, len) };
            for o in 0..out_ch {
                for p in 0..out_len {
                    let mut patch = Vec::with_capacity(in_ch * 3);
                    for c in 0..in_ch {
                        for t in 0..3 {
                            let idx = (p + t).checked_sub(lead).filter(|&i| i < len);
                            patch.push(idx.map_or(0, |i| xcode(x[c * len + i])));
                        }
                    }
                    let e = reference(&patch, &wc[o * in_ch * 3..(o + 1) * in_ch * 3], &wcfg, b[o]);
                    let got = y.data()[o * out_len + p];
                    check(got.to_bits() == e.to_bits(), || format!("case {case} conv mode {mi}: {got} vs {e}"))?;
                    compared += 1;
                }
            }

            let dmode = match *mode {
                PrecisionMode::Int8 { act, signed_input, .. } => PrecisionMode::Int8 { weights: dense_cfg, act, signed_input },
                m => m,
            };
            let y = dense_forward(&flat, &dense_w, &b, &dmode).map_err(|e| e.to_string())?;
            let xc: Vec<i64> = x.iter().map(|&v| xcode(v)).collect();
            let n = x.len();
            for o in 0..out_ch {
                let wc: Vec<i64> = dense_w[o * n..(o + 1) * n].iter().map(|&v| wcode(v, &dense_cfg)).collect();
                let e = reference(&xc, &wc, &dense_cfg, b[o]);
                let got = y.data()[o];
                check(got.to_bits() == e.to_bits(), || format!("case {case} dense mode {mi}: {got} vs {e}"))?;
                compared += 1;
            }
        }
    }
    Ok(format!("50 layers, {compared} outputs bitwise equal"))
}

fn bf16_format() -> Outcome {
    for bits in 0..=u16::MAX {
        let v = Bf16Value::from_bits(bits);
        let back = fp32_to_bf16(v.to_f32());
        if v.is_nan() {
            check(back.is_nan(), || format!("{bits:#06x} lost NaN"))?;
        } else {
            check(back == v, || format!("{bits:#06x} -> {:#06x}", back.to_bits()))?;
        }
    }
    // midpoints between neighbours b and b+1 round to whichever has an even
    // low bit; one f32 ulp either side rounds to the nearer one
    let mut midpoints = 0;
    for hi in (0..=u16::MAX).step_by(7) {
        let lo_bits = u32::from(hi) << 16;
        let lo = f32::from_bits(lo_bits);
        let next = f32::from_bits(lo_bits + 0x1_0000);
        if !lo.is_finite() || !next.is_finite() {
            continue;
        }
        let mid = lo_bits | 0x8000;
        let even = if hi & 1 == 0 { hi } else { hi.wrapping_add(1) };
        let got = fp32_to_bf16(f32::from_bits(mid)).to_bits();
        check(got == even, || format!("midpoint {mid:#010x}: {got:#06x}, want {even:#06x}"))?;
        check(fp32_to_bf16(f32::from_bits(mid - 1)).to_bits() == hi, || format!("below {mid:#010x}"))?;
        check(fp32_to_bf16(f32::from_bits(mid + 1)).to_bits() == hi.wrapping_add(1), || format!("above {mid:#010x}"))?;
        midpoints += 1;
    }
    Ok(format!("65536 patterns round-trip, {midpoints} midpoints round to even"))
}

fn cordic_activations() -> Outcome {
    let grid: Vec<f32> = (0..1000).map(|i| -4.0 + 8.0 * i as f32 / 999.0).collect();
    let max_err = |iters: u32| -> Result<f64, String> {
        grid.iter().try_fold(0.0f64, |m, &x| {
            let y = cordic_tanh(x, iters).map_err(|e| e.to_string())?;
            Ok(m.max((f64::from(y) - f64::from(x).tanh()).abs()))
        })
    };
    let e16 = max_err(16)?;
    check(e16 <= 1e-3, || format!("max error at 16 iterations {e16}"))?;
    let mut prev = f64::INFINITY;
    for iters in 8..=24 {
        let e = max_err(iters)?;
        check(e <= prev, || format!("error rose from {prev} to {e} at {iters} iterations"))?;
        prev = e;
    }
    Ok(format!("max error {e16:.2e} at 16 iterations, non-increasing 8..24"))
}

fn golden_setup() -> Result<(ModelSpec, Vec<Tensor1D>), String> {
    let m = golden_model().map_err(|e| e.to_string())?;
    let calib = extract_features(&synthetic_dataset(64, GOLDEN_CALIB_SEED), GOLDEN_FEATURE)
        .map_err(|e| e.to_string())?
        .records
        .into_iter()
        .map(|(v, _)| Tensor1D::from_vec(v).unwrap())
        .collect();
    Ok((m, calib))
}

fn accuracy_degradation() -> Outcome {
    let t = Instant::now();
    let (m, calib) = golden_setup()?;
    let eval = extract_features(&synthetic_dataset(400, GOLDEN_EVAL_SEED), GOLDEN_FEATURE).map_err(|e| e.to_string())?;
    let mut acc = Vec::new();
    for kind in PrecisionKind::ALL {
        let q = if kind.is_integer() { calibrate_uniform(&m, &calib, kind).map_err(|e| e.to_string())? } else { m.clone() };
        let opts = ForwardOptions { precision_override: Some(kind), ..Default::default() };
        acc.push(100.0 * evaluate(&q, &eval, &opts).map_err(|e| e.to_string())?.accuracy);
    }
    let [fp32, bf16, int8, fxp8] = acc[..] else { unreachable!() };
    check(fp32 - bf16 <= 0.5, || format!("bf16 drop {:.2} points", fp32 - bf16))?;
    check(fp32 - int8 <= 2.5, || format!("int8 drop {:.2} points", fp32 - int8))?;
    check(fp32 - fxp8 <= 2.5, || format!("fxp8 drop {:.2} points", fp32 - fxp8))?;
    within(t, Duration::from_secs(30))?;
    Ok(format!("accuracy fp32 {fp32:.2}, bf16 {bf16:.2}, int8 {int8:.2}, fxp8 {fxp8:.2}"))
}

fn snr_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let seg = AudioSegment::new((0..12_800).map(|_| rng.random_range(-0.6..0.6)).collect(), 16_000)
            .map_err(|e| e.to_string())?;
        for snr in [-10.0, -5.0, 0.0, 10.0, 20.0] {
            let noisy = add_noise(&seg, &NoiseSpec { snr_db: snr, seed }).map_err(|e| e.to_string())?;
            worst = worst.max((measured_snr_db(seg.samples(), noisy.samples()) - snr).abs());
        }
    }
    check(worst <= 0.1, || format!("SNR error {worst:.4} dB"))?;

    let m = golden_model().map_err(|e| e.to_string())?;
    let segs = synthetic_dataset(200, GOLDEN_EVAL_SEED);
    let curve = snr_sweep(&m, &segs, &[20.0, -10.0], 77, GOLDEN_FEATURE, &ForwardOptions::default())
        .map_err(|e| e.to_string())?;
    let (hi, lo) = (curve[0].report.accuracy, curve[1].report.accuracy);
    check(lo <= hi, || format!("accuracy {lo} at -10 dB above {hi} at +20 dB"))?;
    Ok(format!("max SNR error {worst:.4} dB; accuracy +20 dB {hi:.3}, -10 dB {lo:.3}"))
}

/// extract -> quantize -> prune -> infer -> eval, reports written to `dir`.
fn pipeline_run(dir: &Path, seed: u64) -> Result<(), String> {
    let (m, calib) = golden_setup()?;
    let q = calibrate_uniform(&m, &calib, PrecisionKind::Int8).map_err(|e| e.to_string())?;
    let (p, _) = prune_channels(&q, &PruneConfig::channels(12)).map_err(|e| e.to_string())?;
    let segs = synthetic_dataset(60, seed);
    let set = extract_features(&segs, GOLDEN_FEATURE).map_err(|e| e.to_string())?;
    let mut report = evaluate(&p, &set, &ForwardOptions::default()).map_err(|e| e.to_string())?;
    report.curve = snr_sweep(&p, &segs, &[f64::INFINITY, 0.0], seed, GOLDEN_FEATURE, &ForwardOptions::default())
        .map_err(|e| e.to_string())?;
    let prof = profile_from_model(&p, Regime::Unit, MAC_BANK_WIDTH).map_err(|e| e.to_string())?;
    report.cycles = Some(simulate_schedule(&prof, ScheduleMode::Reusable).map_err(|e| e.to_string())?);
    write_report(dir, &report).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("model.s8uv"), write_model(&p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("features.s8fv"), write_features(&set).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let _ = (metrics_csv(&report), report_json(&report));
    Ok(())
}

fn determinism_and_formats() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    pipeline_run(a.path(), 2024)?;
    pipeline_run(b.path(), 2024)?;
    let mut files: Vec<String> = std::fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    for f in &files {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        check(x == y, || format!("{f} differs between runs"))?;
    }

    let model_bytes = std::fs::read(a.path().join("model.s8uv")).unwrap();
    let back = read_model(&model_bytes).map_err(|e| e.to_string())?;
    check(write_model(&back).map_err(|e| e.to_string())? == model_bytes, || "model round trip differs".into())?;
    let feat_bytes = std::fs::read(a.path().join("features.s8fv")).unwrap();
    let set: FeatureSet = read_features(&feat_bytes).map_err(|e| e.to_string())?;
    check(write_features(&set).map_err(|e| e.to_string())? == feat_bytes, || "feature round trip differs".into())?;

    for (name, bytes) in [("model", &model_bytes), ("features", &feat_bytes)] {
        let mut bad_magic = bytes.clone();
        bad_magic[1] ^= 0xFF;
        let mut bad_crc = bytes.clone();
        let mid = bad_crc.len() / 2;
        bad_crc[mid] ^= 0x01;
        let mut bad_tail = bytes.clone();
        *bad_tail.last_mut().unwrap() ^= 0x80;
        let parse = |b: &[u8]| -> Result<(), FormatError> {
            if name == "model" {
                read_model(b).map(|_| ())
            } else {
                read_features(b).map(|_| ())
            }
        };
        check(matches!(parse(&bad_magic), Err(FormatError::BadMagic { .. })), || format!("{name}: bad magic accepted"))?;
        check(matches!(parse(&bad_crc), Err(FormatError::ChecksumMismatch { .. })), || format!("{name}: payload flip accepted"))?;
        check(matches!(parse(&bad_tail), Err(FormatError::ChecksumMismatch { .. })), || format!("{name}: crc flip accepted"))?;
    }
    Ok(format!("{} report files identical across runs; containers round-trip; corruption rejected", files.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("timing-model equivalence", timing_equivalence),
        ("pruning numbers", pruning_numbers),
        ("quantization math", quantization_math),
        ("bit-exact integer paths", bit_exact_integer_paths),
        ("bf16 format", bf16_format),
        ("cordic activations", cordic_activations),
        ("accuracy degradation", accuracy_degradation),
        ("snr machinery", snr_machinery),
        ("determinism and formats", determinism_and_formats),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
