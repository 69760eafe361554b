use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use uavaccel::app::{
    augment, evaluate, extract_features, golden_model, infer_all, parse_cycles_json, parse_report_json,
    parse_snr, parse_snr_list, render_text, segments_from_set, selftest, snr_sweep, synthetic_dataset,
    write_cycles, write_report,
};
use uavaccel::dsp::{
    load_features, normalize, read_wav, save_features, segment, FeatureKind, FeatureSet, DEFAULT_SAMPLE_RATE,
};
use uavaccel::nn::{load_model, save_model, ForwardOptions, ModelSpec, SoftmaxImpl, Tensor1D};
use uavaccel::numerics::{PrecisionKind, DEFAULT_CORDIC_ITERS};
use uavaccel::prune::{flatten_dim, prune_channels, PruneConfig};
use uavaccel::quant::{
    assign_precisions, calibrate, cross_entropy, grad_norms_fd, model_sensitivity, parse_grad_norms,
    AssignPolicy, PrecisionAssignment,
};
use uavaccel::sim::{
    energy_estimate, latency, profile_from_model, simulate_schedule, EnergyCoefficients, LayerCycleProfile,
    Regime, ScheduleMode, MAC_BANK_WIDTH,
};

use crate::{fail, Ctx, Failure};

const DEFAULT_SNRS: &str = "clean,20,10,0,-5,-10";
const DEFAULT_CLOCK_HZ: f64 = 100e6;

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Segment audio (or synthesize it) and write a feature dataset.
    Extract(ExtractArgs),
    /// Add noise at one SNR to a raw dataset.
    Augment(AugmentArgs),
    /// Tag layers with precisions and calibrate their parameters.
    Quantize(QuantizeArgs),
    /// Score layer sensitivity and derive a precision assignment.
    Sensitivity(SensitivityArgs),
    /// Prune channels of the convolution feeding the flatten.
    Prune(PruneArgs),
    /// Write per-record class probabilities.
    Infer(InferArgs),
    /// Cycle-level schedule simulation.
    Simulate(SimulateArgs),
    /// Detection metrics on a labelled dataset.
    Eval(EvalArgs),
    /// Accuracy, FAR and MDR across SNR levels.
    Sweep(SweepArgs),
    /// Render saved evaluation and cycle reports.
    Report(ReportArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Raw,
    Mfcc20,
    Mel128,
    Logpsd,
    Zcr,
}

impl From<Kind> for FeatureKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Raw => Self::Raw,
            Kind::Mfcc20 => Self::Mfcc20,
            Kind::Mel128 => Self::Mel128,
            Kind::Logpsd => Self::LogPsd,
            Kind::Zcr => Self::Zcr,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Softmax {
    Exact,
    Cordic,
}

fn precision(s: &str) -> Result<PrecisionKind, String> {
    s.parse()
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// 16-bit mono WAV files.
    #[arg(long, num_args = 1.., conflicts_with = "synthetic")]
    input: Vec<PathBuf>,
    /// Label for every segment of the WAV inputs (1 = UAV).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    label: u8,
    /// Generate this many synthetic segments instead of reading audio.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, value_enum, default_value = "mel128")]
    kind: Kind,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    rate: u32,
    /// Output file (default OUT/features.s8fv).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Raw dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// SNR in dB, or `clean`.
    #[arg(long, value_parser = parse_snr)]
    snr: f64,
    /// Feature kind of the output; raw keeps the noisy audio.
    #[arg(long, value_enum, default_value = "raw")]
    kind: Kind,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    rate: u32,
    /// Output file (default OUT/augmented.s8fv).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct QuantizeArgs {
    #[arg(long)]
    model: Option<String>,
    /// Feature dataset whose records calibrate activation ranges.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Precision for every weighted layer.
    #[arg(long, value_parser = precision, conflicts_with = "assignment")]
    precision: Option<PrecisionKind>,
    /// `layer_id precision` file, as written by `sensitivity`.
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Calibration records used.
    #[arg(long, default_value_t = 64)]
    calib_count: usize,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[arg(long)]
    model: Option<String>,
    /// `layer_id grad_norm` file.
    #[arg(long, conflicts_with = "dataset")]
    grads: Option<PathBuf>,
    /// Labelled features for finite-difference gradient norms (first 32).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Number of layers kept at high precision.
    #[arg(long, conflicts_with = "threshold")]
    budget: Option<usize>,
    /// Layers scoring above this stay at high precision.
    #[arg(long)]
    threshold: Option<f64>,
    /// Precision of the remaining layers.
    #[arg(long, value_parser = precision, default_value = "int8")]
    low: PrecisionKind,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long, conflicts_with = "target_channels")]
    target_flatten: Option<usize>,
    #[arg(long)]
    target_channels: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ForwardArgs {
    /// Run every weighted layer in this precision.
    #[arg(long, value_parser = precision)]
    precision: Option<PrecisionKind>,
    #[arg(long, value_enum, default_value = "exact")]
    softmax: Softmax,
    #[arg(long, default_value_t = DEFAULT_CORDIC_ITERS)]
    cordic_iters: u32,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    fwd: ForwardArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Profile file: `key=value` header, then `layer_id n_l K_l [s_l]`.
    #[arg(long, conflicts_with = "model")]
    profile: Option<PathBuf>,
    /// Derive the profile from a model instead.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value = "reusable")]
    mode: ScheduleMode,
    /// Clock in Hz.
    #[arg(long)]
    clock: Option<f64>,
    /// Activation/serialisation counts for model profiles.
    #[arg(long, value_enum, default_value = "unit")]
    regime: RegimeArg,
    #[arg(long, default_value_t = MAC_BANK_WIDTH)]
    width: u64,
    /// Energy-per-cycle file with `mac=`, `serial=`, `af=` lines.
    #[arg(long)]
    energy: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RegimeArg {
    Unit,
    Full,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    fwd: ForwardArgs,
    /// Attach a reusable-schedule cycle report for the model.
    #[arg(long)]
    cycles: bool,
    #[arg(long)]
    clock: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    model: Option<String>,
    /// Raw dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated SNRs in dB; `clean` for no noise.
    #[arg(long, value_parser = snr_list)]
    snr: Option<SnrList>,
    #[arg(long, value_enum, default_value = "mel128")]
    kind: Kind,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    rate: u32,
    #[command(flatten)]
    fwd: ForwardArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// report.json written by eval or sweep.
    #[arg(long)]
    eval: PathBuf,
    /// cycles.json written by simulate.
    #[arg(long)]
    cycles: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct SnrList(Vec<f64>);

fn snr_list(s: &str) -> Result<SnrList, String> {
    parse_snr_list(s).map(SnrList)
}

fn need<T>(v: Option<T>, sub: &'static str, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(sub, format!("missing --{flag} (or `{}` in the config file)", flag.replace('-', "_"))))
}

fn model_arg(arg: Option<String>, ctx: &Ctx, sub: &'static str) -> Result<String, Failure> {
    need(arg.or_else(|| ctx.cfg.model.as_ref().map(|p| p.display().to_string())), sub, "model")
}

/// A model file, or `builtin:canonical` / `builtin:golden`.
fn load(spec: &str, ctx: &Ctx, sub: &'static str) -> Result<ModelSpec, Failure> {
    match spec.strip_prefix("builtin:") {
        Some("canonical") => ModelSpec::canonical(ctx.seed).map_err(fail),
        Some("golden") => golden_model().map_err(fail),
        Some(other) => Err(Failure::usage(sub, format!("unknown builtin model `{other}` (canonical, golden)"))),
        None => load_model(spec).map_err(|e| Failure::Data(format!("{spec}: {e}"))),
    }
}

fn load_set(path: &Path) -> Result<FeatureSet, Failure> {
    load_features(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn out_file(ctx: &Ctx, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&ctx.out).map_err(|e| Failure::Data(format!("{}: {e}", ctx.out.display())))?;
    Ok(ctx.out.join(name))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn forward_opts(f: &ForwardArgs, ctx: &Ctx) -> ForwardOptions {
    ForwardOptions {
        softmax: match f.softmax {
            Softmax::Exact => SoftmaxImpl::Exact,
            Softmax::Cordic => SoftmaxImpl::Cordic { iters: f.cordic_iters },
        },
        precision_override: f.precision.or(ctx.cfg.precision),
        keep_snapshots: false,
    }
}

pub fn dispatch(cmd: Command, ctx: &Ctx) -> Result<(), Failure> {
    match cmd {
        Command::Extract(a) => extract(a, ctx),
        Command::Augment(a) => augment_cmd(a, ctx),
        Command::Quantize(a) => quantize(a, ctx),
        Command::Sensitivity(a) => sensitivity(a, ctx),
        Command::Prune(a) => prune(a, ctx),
        Command::Infer(a) => infer(a, ctx),
        Command::Simulate(a) => simulate(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::Sweep(a) => sweep(a, ctx),
        Command::Report(a) => report(a, ctx),
        Command::Selftest => run_selftest(),
    }
}

fn extract(a: ExtractArgs, ctx: &Ctx) -> Result<(), Failure> {
    let segs = match a.synthetic {
        Some(0) => return Err(Failure::usage("extract", "--synthetic needs at least one segment")),
        Some(n) => synthetic_dataset(n, ctx.seed),
        None => {
            if a.input.is_empty() {
                return Err(Failure::usage("extract", "give --input WAV files or --synthetic N"));
            }
            let mut segs = Vec::new();
            for path in &a.input {
                let (audio, rate) = read_wav(path, Some(a.rate)).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
                for s in segment(&audio, rate).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))? {
                    segs.push((normalize(&s).0, a.label));
                }
            }
            segs
        }
    };
    let set = extract_features(&segs, a.kind.into()).map_err(fail)?;
    let path = match a.output {
        Some(p) => p,
        None => out_file(ctx, "features.s8fv")?,
    };
    save_features(&set, &path).map_err(fail)?;
    println!("wrote {} {} records of length {} to {}", set.len(), set.kind.name(), set.record_len, path.display());
    Ok(())
}

fn augment_cmd(a: AugmentArgs, ctx: &Ctx) -> Result<(), Failure> {
    let path = need(a.dataset.or_else(|| ctx.cfg.dataset.clone()), "augment", "dataset")?;
    let segs = segments_from_set(&load_set(&path)?, a.rate).map_err(fail)?;
    let noisy = augment(&segs, a.snr, ctx.seed).map_err(fail)?;
    let set = extract_features(&noisy, a.kind.into()).map_err(fail)?;
    let out = match a.output {
        Some(p) => p,
        None => out_file(ctx, "augmented.s8fv")?,
    };
    save_features(&set, &out).map_err(fail)?;
    println!("wrote {} {} records to {}", set.len(), set.kind.name(), out.display());
    Ok(())
}

fn calibration_inputs(path: &Path, count: usize) -> Result<Vec<Tensor1D>, Failure> {
    load_set(path)?
        .records
        .into_iter()
        .take(count)
        .map(|(v, _)| Tensor1D::from_vec(v).map_err(fail))
        .collect()
}

fn quantize(a: QuantizeArgs, ctx: &Ctx) -> Result<(), Failure> {
    let spec = model_arg(a.model, ctx, "quantize")?;
    let m = load(&spec, ctx, "quantize")?;
    let assignment = match (&a.assignment, a.precision.or(ctx.cfg.precision)) {
        (Some(p), _) => PrecisionAssignment::parse(&read_text(p)?).map_err(fail)?,
        (None, Some(kind)) => m.weighted_layers().into_iter().map(|i| (i, kind)).collect(),
        (None, None) => return Err(Failure::usage("quantize", "give --precision or --assignment")),
    };
    let integer = assignment.values().any(|k| k.is_integer());
    let calib = match a.calibration.or_else(|| ctx.cfg.calibration.clone()) {
        Some(p) => calibration_inputs(&p, a.calib_count)?,
        None if integer => return Err(Failure::usage("quantize", "integer precisions need --calibration")),
        None => Vec::new(),
    };
    let q = if calib.is_empty() {
        let mut q = m.clone();
        for (&i, &k) in &assignment {
            q.layers.get_mut(i).ok_or_else(|| Failure::Data(format!("assignment names missing layer {i}")))?.precision = k;
        }
        q
    } else {
        calibrate(&m, &calib, &assignment).map_err(fail)?
    };
    let path = out_file(ctx, "model.s8uv")?;
    save_model(&q, &path).map_err(fail)?;
    for (i, k) in q.precision_map() {
        println!("layer {i} {} {k}", q.layers[i].spec.name());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sensitivity(a: SensitivityArgs, ctx: &Ctx) -> Result<(), Failure> {
    let spec = model_arg(a.model, ctx, "sensitivity")?;
    let m = load(&spec, ctx, "sensitivity")?;
    let grads = match (&a.grads, a.dataset.clone().or_else(|| ctx.cfg.dataset.clone())) {
        (Some(g), _) => parse_grad_norms(&read_text(g)?).map_err(fail)?,
        (None, Some(d)) => {
            let set = load_set(&d)?;
            let samples: Vec<(Tensor1D, usize)> = set
                .records
                .into_iter()
                .take(32)
                .map(|(v, l)| Ok((Tensor1D::from_vec(v).map_err(fail)?, usize::from(l))))
                .collect::<Result<_, Failure>>()?;
            grad_norms_fd(&m, &samples, 1e-3, cross_entropy).map_err(fail)?
        }
        (None, None) => return Err(Failure::usage("sensitivity", "give --grads or --dataset")),
    };
    let report = model_sensitivity(&m, &grads).map_err(fail)?;
    let policy = match (a.budget, a.threshold) {
        (Some(b), _) => AssignPolicy::budget(b),
        (None, Some(t)) => AssignPolicy::threshold(t),
        (None, None) => AssignPolicy::budget(1),
    }
    .with_low(a.low);
    let assignment = assign_precisions(&report, policy).map_err(fail)?;
    write(&out_file(ctx, "sensitivity.txt")?, &report.to_text())?;
    write(&out_file(ctx, "assignment.txt")?, &assignment.to_text())?;
    print!("{}", report.to_text());
    print!("{}", assignment.to_text());
    Ok(())
}

fn prune(a: PruneArgs, ctx: &Ctx) -> Result<(), Failure> {
    let spec = model_arg(a.model, ctx, "prune")?;
    let m = load(&spec, ctx, "prune")?;
    let cfg = match (a.target_flatten.or(ctx.cfg.prune_target), a.target_channels) {
        (_, Some(c)) => PruneConfig::channels(c),
        (Some(f), None) => PruneConfig::flatten(f),
        (None, None) => return Err(Failure::usage("prune", "give --target-flatten or --target-channels")),
    };
    let before = flatten_dim(&m).map_err(fail)?;
    let (p, record) = prune_channels(&m, &cfg).map_err(fail)?;
    let after = flatten_dim(&p).map_err(fail)?;
    let path = out_file(ctx, "model.s8uv")?;
    save_model(&p, &path).map_err(fail)?;
    write(&out_file(ctx, "prune.txt")?, &record.to_text())?;
    println!("flatten_dim {before} -> {after}");
    println!("removed {} channels", record.removed.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn infer(a: InferArgs, ctx: &Ctx) -> Result<(), Failure> {
    let spec = model_arg(a.model, ctx, "infer")?;
    let m = load(&spec, ctx, "infer")?;
    let set = load_set(&need(a.dataset.or_else(|| ctx.cfg.dataset.clone()), "infer", "dataset")?)?;
    let probs = infer_all(&m, &set, &forward_opts(&a.fwd, ctx)).map_err(fail)?;
    let mut csv = String::from("index,label,predicted,p_uav\n");
    for (i, (p, (_, label))) in probs.iter().zip(&set.records).enumerate() {
        let pred = uavaccel::nn::argmax(p);
        let p_uav = p.get(1).copied().unwrap_or(f32::NAN);
        csv.push_str(&format!("{i},{label},{pred},{p_uav:.6}\n"));
    }
    let path = out_file(ctx, "predictions.csv")?;
    write(&path, &csv)?;
    println!("wrote {} predictions to {}", probs.len(), path.display());
    Ok(())
}

fn simulate(a: SimulateArgs, ctx: &Ctx) -> Result<(), Failure> {
    let profile = match (a.profile.or_else(|| ctx.cfg.profile.clone()), a.model) {
        (Some(p), _) => LayerCycleProfile::parse(&read_text(&p)?).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
        (None, Some(spec)) => {
            let m = load(&spec, ctx, "simulate")?;
            let regime = match a.regime {
                RegimeArg::Unit => Regime::Unit,
                RegimeArg::Full => Regime::Full,
            };
            profile_from_model(&m, regime, a.width).map_err(fail)?
        }
        (None, None) => return Err(Failure::usage("simulate", "give --profile or --model")),
    };
    let mut r = simulate_schedule(&profile, a.mode).map_err(fail)?;
    let clock = a.clock.or(profile.clock_hz).or(ctx.cfg.clock_hz).unwrap_or(DEFAULT_CLOCK_HZ);
    latency(&mut r, clock).map_err(fail)?;
    if let Some(e) = a.energy {
        let coeffs = EnergyCoefficients::parse(&read_text(&e)?).map_err(fail)?;
        energy_estimate(&mut r, &coeffs).map_err(fail)?;
    }
    write_cycles(&ctx.out, &r).map_err(fail)?;
    print!("{}", r.to_text());
    Ok(())
}

fn cycle_report(m: &ModelSpec, clock: f64) -> Result<uavaccel::sim::CycleReport, Failure> {
    let p = profile_from_model(m, Regime::Unit, MAC_BANK_WIDTH).map_err(fail)?;
    let mut r = simulate_schedule(&p, ScheduleMode::Reusable).map_err(fail)?;
    latency(&mut r, clock).map_err(fail)?;
    Ok(r)
}

fn eval(a: EvalArgs, ctx: &Ctx) -> Result<(), Failure> {
    let spec = model_arg(a.model, ctx, "eval")?;
    let m = load(&spec, ctx, "eval")?;
    let set = load_set(&need(a.dataset.or_else(|| ctx.cfg.dataset.clone()), "eval", "dataset")?)?;
    let mut r = evaluate(&m, &set, &forward_opts(&a.fwd, ctx)).map_err(fail)?;
    if a.cycles {
        r.cycles = Some(cycle_report(&m, a.clock.or(ctx.cfg.clock_hz).unwrap_or(DEFAULT_CLOCK_HZ))?);
    }
    write_report(&ctx.out, &r).map_err(fail)?;
    print!("{}", render_text(&r));
    Ok(())
}

fn sweep(a: SweepArgs, ctx: &Ctx) -> Result<(), Failure> {
    let spec = model_arg(a.model, ctx, "sweep")?;
    let m = load(&spec, ctx, "sweep")?;
    let set = load_set(&need(a.dataset.or_else(|| ctx.cfg.dataset.clone()), "sweep", "dataset")?)?;
    let segs = segments_from_set(&set, a.rate).map_err(fail)?;
    let snrs = match a.snr.map(|l| l.0).or_else(|| ctx.cfg.snr.clone()) {
        Some(s) if s.is_empty() => return Err(Failure::usage("sweep", "--snr list is empty")),
        Some(s) => s,
        None => parse_snr_list(DEFAULT_SNRS).expect("default SNR list parses"),
    };
    let opts = forward_opts(&a.fwd, ctx);
    let kind: FeatureKind = a.kind.into();
    let mut r = snr_sweep(&m, &segs, &[f64::INFINITY], ctx.seed, kind, &opts).map_err(fail)?.remove(0).report;
    r.curve = snr_sweep(&m, &segs, &snrs, ctx.seed, kind, &opts).map_err(fail)?;
    write_report(&ctx.out, &r).map_err(fail)?;
    print!("{}", render_text(&r));
    Ok(())
}

fn report(a: ReportArgs, ctx: &Ctx) -> Result<(), Failure> {
    let mut r = parse_report_json(&read_text(&a.eval)?).map_err(|e| Failure::Data(format!("{}: {e}", a.eval.display())))?;
    if let Some(c) = &a.cycles {
        r.cycles = Some(parse_cycles_json(&read_text(c)?).map_err(|e| Failure::Data(format!("{}: {e}", c.display())))?);
    }
    write_report(&ctx.out, &r).map_err(fail)?;
    print!("{}", render_text(&r));
    Ok(())
}

fn run_selftest() -> Result<(), Failure> {
    let mut failed = Vec::new();
    for c in selftest() {
        match &c.result {
            Ok(()) => println!("PASS {}", c.name),
            Err(e) => {
                println!("FAIL {}: {e}", c.name);
                failed.push(c.name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("self-test failed: {}", failed.join(", "))))
    }
}
