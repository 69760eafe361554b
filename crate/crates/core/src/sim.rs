//! Cycle model of the accelerator: closed-form totals for the unit-cost
//! regime and an event-driven walk of the per-layer control FSM that must
//! reproduce them.
//!
//! Reusable mode runs every layer on one datapath. Layer `l` costs
//! `t_mac * n_l` MAC cycles, `t_serial * s_l` cycles to stream its input
//! through the serializer (absent for the first layer, which reads the
//! input buffer directly) and `K_l * t_af` activation cycles (absent for the
//! last layer, whose activation overlaps the writeback). The first MAC
//! issues in the cycle that completes the initial load, so one cycle of the
//! schedule overlaps. With unit costs this is `sum(n) + 2L - 3`.
//!
//! Parallel mode gives every layer its own datapath. Layer `l < L` costs
//! `t_mac * n_l + t_af`; the last layer drains while its outputs stream
//! out and is not on the critical path, giving `sum(n_1..n_{L-1}) + L - 1`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{LayerSpec, ModelSpec, NnError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("closed form needs unit stage costs, got t_mac={t_mac} t_af={t_af} t_serial={t_serial}")]
    UnsupportedRegime { t_mac: u64, t_af: u64, t_serial: u64 },
    #[error("{mode} schedule needs at least {min} layers, got {got}")]
    TooFewLayers { mode: ScheduleMode, got: usize, min: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("clock must be positive and finite, got {0}")]
    InvalidClock(f64),
    #[error("energy coefficient for {stage} is negative ({value})")]
    NegativeCoefficient { stage: &'static str, value: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Parallel,
    Reusable,
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Parallel => "parallel",
            Self::Reusable => "reusable",
        })
    }
}

impl FromStr for ScheduleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "parallel" => Ok(Self::Parallel),
            "reusable" => Ok(Self::Reusable),
            _ => Err(format!("unknown schedule mode `{s}` (expected parallel or reusable)")),
        }
    }
}

/// Cycles per stage invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCosts {
    pub t_mac: u64,
    pub t_af: u64,
    pub t_serial: u64,
}

impl Default for StageCosts {
    fn default() -> Self {
        Self { t_mac: 1, t_af: 1, t_serial: 1 }
    }
}

impl StageCosts {
    pub fn is_unit(&self) -> bool {
        *self == Self::default()
    }
}

/// Work of one layer: `n` MAC cycles, `k` activation outputs to serialize
/// through the activation unit and `s` input elements streamed in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub id: String,
    pub n: u64,
    pub k: u64,
    pub s: u64,
}

impl LayerCost {
    pub fn unit(id: impl Into<String>, n: u64) -> Self {
        Self { id: id.into(), n, k: 1, s: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCycleProfile {
    pub layers: Vec<LayerCost>,
    pub costs: StageCosts,
    /// Clock from the profile header, if given.
    pub clock_hz: Option<f64>,
}

impl LayerCycleProfile {
    /// Unit-cost profile with `K = s = 1`.
    pub fn from_macs(n: &[u64]) -> Self {
        Self {
            layers: n.iter().enumerate().map(|(i, &n)| LayerCost::unit(i.to_string(), n)).collect(),
            costs: StageCosts::default(),
            clock_hz: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.layers.is_empty() {
            return Err(SimError::InvalidProfile("no layers".into()));
        }
        let c = self.costs;
        if c.t_mac == 0 || c.t_af == 0 || c.t_serial == 0 {
            return Err(SimError::InvalidProfile("stage costs must be at least 1".into()));
        }
        for l in &self.layers {
            if l.n == 0 || l.k == 0 || l.s == 0 {
                return Err(SimError::InvalidProfile(format!("layer {}: counts must be at least 1", l.id)));
            }
        }
        if let Some(hz) = self.clock_hz {
            check_clock(hz)?;
        }
        Ok(())
    }

    /// Text form: `key=value` header (`t_mac`, `t_af`, `t_serial`,
    /// `clock_hz`), then `layer_id n_l K_l [s_l]` per layer. `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut p = Self { layers: Vec::new(), costs: StageCosts::default(), clock_hz: None };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: i + 1, msg };
            if let Some((key, value)) = line.split_once('=') {
                if !p.layers.is_empty() {
                    return Err(err("header keys must precede layer lines".into()));
                }
                let value = value.trim();
                let int = || value.parse::<u64>().map_err(|e| err(format!("{}: {e}", key.trim())));
                match key.trim() {
                    "t_mac" => p.costs.t_mac = int()?,
                    "t_af" => p.costs.t_af = int()?,
                    "t_serial" | "t_piso" => p.costs.t_serial = int()?,
                    "clock_hz" => {
                        p.clock_hz = Some(value.parse::<f64>().map_err(|e| err(format!("clock_hz: {e}")))?)
                    }
                    other => return Err(err(format!("unknown key `{other}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(err(format!("expected `layer_id n_l K_l [s_l]`, got {} fields", fields.len())));
            }
            let num = |s: &str, what: &str| s.parse::<u64>().map_err(|e| err(format!("{what}: {e}")));
            p.layers.push(LayerCost {
                id: fields[0].to_string(),
                n: num(fields[1], "n_l")?,
                k: num(fields[2], "K_l")?,
                s: fields.get(3).map_or(Ok(1), |s| num(s, "s_l"))?,
            });
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "t_mac={}\nt_af={}\nt_serial={}\n",
            self.costs.t_mac, self.costs.t_af, self.costs.t_serial
        );
        if let Some(hz) = self.clock_hz {
            out.push_str(&format!("clock_hz={hz}\n"));
        }
        for l in &self.layers {
            out.push_str(&format!("{} {} {} {}\n", l.id, l.n, l.k, l.s));
        }
        out
    }
}

/// How activation and serialisation counts are derived from a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `K = s = 1`, the regime of the closed forms.
    Unit,
    /// `K` = output elements, `s` = input elements of the layer.
    Full,
}

/// Default number of parallel MAC lanes.
pub const MAC_BANK_WIDTH: u64 = 64;

/// Profile of the weighted layers of `m`. A layer producing `u` output
/// elements with fan-in `f` occupies `ceil(u / width) * f` MAC cycles.
pub fn profile_from_model(m: &ModelSpec, regime: Regime, width: u64) -> Result<LayerCycleProfile, SimError> {
    if width == 0 {
        return Err(SimError::InvalidProfile("MAC bank width must be at least 1".into()));
    }
    let shapes = m.shapes()?;
    let mut layers = Vec::new();
    for i in m.weighted_layers() {
        let (ic, il) = shapes[i - 1];
        let (oc, ol) = shapes[i];
        let fan = match m.layers[i].spec {
            LayerSpec::Conv1D { in_ch, .. } => in_ch as u64 * crate::nn::CONV_KERNEL as u64,
            LayerSpec::Dense { in_dim, .. } => in_dim as u64,
            _ => unreachable!(),
        };
        let outputs = (oc * ol) as u64;
        let (k, s) = match regime {
            Regime::Unit => (1, 1),
            Regime::Full => (outputs, (ic * il) as u64),
        };
        layers.push(LayerCost { id: i.to_string(), n: outputs.div_ceil(width) * fan, k, s });
    }
    let p = LayerCycleProfile { layers, costs: StageCosts::default(), clock_hz: None };
    p.validate()?;
    Ok(p)
}

fn min_layers(mode: ScheduleMode) -> usize {
    match mode {
        ScheduleMode::Parallel => 1,
        ScheduleMode::Reusable => 2,
    }
}

fn check_layers(p: &LayerCycleProfile, mode: ScheduleMode) -> Result<(), SimError> {
    p.validate()?;
    let min = min_layers(mode);
    if p.layers.len() < min {
        return Err(SimError::TooFewLayers { mode, got: p.layers.len(), min });
    }
    Ok(())
}

/// Total cycles by the closed forms; unit stage costs and `K = 1` only.
pub fn closed_form_cycles(p: &LayerCycleProfile, mode: ScheduleMode) -> Result<u64, SimError> {
    check_layers(p, mode)?;
    let c = p.costs;
    if !c.is_unit() || p.layers.iter().any(|l| l.k != 1 || l.s != 1) {
        return Err(SimError::UnsupportedRegime { t_mac: c.t_mac, t_af: c.t_af, t_serial: c.t_serial });
    }
    let l = p.layers.len() as u64;
    Ok(match mode {
        ScheduleMode::Parallel => p.layers[..p.layers.len() - 1].iter().map(|x| x.n).sum::<u64>() + l - 1,
        ScheduleMode::Reusable => p.layers.iter().map(|x| x.n).sum::<u64>() + 2 * l - 3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FsmState {
    Load,
    Serialize,
    Mac,
    Activate,
    Writeback,
}

impl FsmState {
    fn next(self) -> Option<Self> {
        match self {
            Self::Load => Some(Self::Serialize),
            Self::Serialize => Some(Self::Mac),
            Self::Mac => Some(Self::Activate),
            Self::Activate => Some(Self::Writeback),
            Self::Writeback => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCycles {
    pub id: String,
    pub mac_cycles: u64,
    pub serial_cycles: u64,
    pub af_cycles: u64,
    /// Cycle at which the layer's writeback completed.
    pub done_at: u64,
}

impl LayerCycles {
    pub fn stage_cycles(&self) -> u64 {
        self.mac_cycles + self.serial_cycles + self.af_cycles
    }
}

/// Result of one schedule simulation. `total_cycles` equals the per-layer
/// stage cycles on the critical path minus `overlap_cycles`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub mode: ScheduleMode,
    pub total_cycles: u64,
    pub layers: Vec<LayerCycles>,
    pub overlap_cycles: u64,
    /// Set when the schedule has no critical path (single-layer parallel).
    pub degenerate: bool,
    pub clock_hz: Option<f64>,
    pub latency_s: Option<f64>,
    pub energy_j: Option<f64>,
}

impl CycleReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("mode={}\ntotal_cycles={}\noverlap_cycles={}\n", self.mode, self.total_cycles, self.overlap_cycles);
        if self.degenerate {
            out.push_str("degenerate=true\n");
        }
        for l in &self.layers {
            out.push_str(&format!(
                "layer.{}=mac:{} serial:{} af:{}\n",
                l.id, l.mac_cycles, l.serial_cycles, l.af_cycles
            ));
        }
        if let Some(hz) = self.clock_hz {
            out.push_str(&format!("clock_hz={hz}\n"));
        }
        if let Some(s) = self.latency_s {
            out.push_str(&format!("latency_s={s:.9}\n"));
        }
        if let Some(e) = self.energy_j {
            out.push_str(&format!("energy_j={e:.6e}\n"));
        }
        out.push_str("scope=compute cycles only; bus, DMA and host transfers excluded\n");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn stage_duration(p: &LayerCycleProfile, mode: ScheduleMode, layer: usize, state: FsmState) -> u64 {
    let c = p.costs;
    let l = &p.layers[layer];
    let last = layer + 1 == p.layers.len();
    match (mode, state) {
        (_, FsmState::Load | FsmState::Writeback) => 0,
        (_, FsmState::Mac) => c.t_mac * l.n,
        (ScheduleMode::Reusable, FsmState::Serialize) if layer > 0 => c.t_serial * l.s,
        (ScheduleMode::Reusable, FsmState::Activate) if !last => l.k * c.t_af,
        (ScheduleMode::Parallel, FsmState::Activate) => c.t_af,
        _ => 0,
    }
}

/// Event-driven run of the per-layer FSM. Stage completions are events in a
/// time-ordered queue; a layer starts when its predecessor writes back.
pub fn simulate_schedule(p: &LayerCycleProfile, mode: ScheduleMode) -> Result<CycleReport, SimError> {
    check_layers(p, mode)?;
    let n_layers = p.layers.len();
    let mut layers: Vec<LayerCycles> = p
        .layers
        .iter()
        .map(|l| LayerCycles { id: l.id.clone(), mac_cycles: 0, serial_cycles: 0, af_cycles: 0, done_at: 0 })
        .collect();
    // (time, layer, state entered)
    let mut queue = BinaryHeap::new();
    queue.push(Reverse((0u64, 0usize, FsmState::Load)));
    while let Some(Reverse((now, layer, state))) = queue.pop() {
        let d = stage_duration(p, mode, layer, state);
        let rec = &mut layers[layer];
        match state {
            FsmState::Mac => rec.mac_cycles += d,
            FsmState::Serialize => rec.serial_cycles += d,
            FsmState::Activate => rec.af_cycles += d,
            FsmState::Load | FsmState::Writeback => {}
        }
        let end = now + d;
        match state.next() {
            Some(next) => queue.push(Reverse((end, layer, next))),
            None => {
                rec.done_at = end;
                if layer + 1 < n_layers {
                    queue.push(Reverse((end, layer + 1, FsmState::Load)));
                }
            }
        }
    }

    let (total, overlap, degenerate) = match mode {
        ScheduleMode::Reusable => {
            let end = layers[n_layers - 1].done_at;
            (end - 1, 1, false)
        }
        ScheduleMode::Parallel => {
            // the last layer drains off the critical path
            let tail = layers[n_layers - 1].stage_cycles();
            let end = if n_layers > 1 { layers[n_layers - 2].done_at } else { 0 };
            (end, tail, n_layers == 1)
        }
    };
    debug_assert_eq!(layers.iter().map(LayerCycles::stage_cycles).sum::<u64>() - overlap, total);
    Ok(CycleReport {
        mode,
        total_cycles: total,
        layers,
        overlap_cycles: overlap,
        degenerate,
        clock_hz: None,
        latency_s: None,
        energy_j: None,
    })
}

fn check_clock(hz: f64) -> Result<(), SimError> {
    if hz.is_finite() && hz > 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidClock(hz))
    }
}

/// Seconds for the report's cycles at `clock_hz`; also stored in the report.
pub fn latency(report: &mut CycleReport, clock_hz: f64) -> Result<f64, SimError> {
    check_clock(clock_hz)?;
    let s = report.total_cycles as f64 / clock_hz;
    report.clock_hz = Some(clock_hz);
    report.latency_s = Some(s);
    Ok(s)
}

/// Energy per cycle of each stage, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyCoefficients {
    pub mac: f64,
    pub serial: f64,
    pub af: f64,
}

impl EnergyCoefficients {
    /// `mac=`, `serial=`, `af=` lines; missing keys are zero.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SimError::Parse { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let v: f64 = v.trim().parse().map_err(|e| err(format!("{}: {e}", k.trim())))?;
            match k.trim() {
                "mac" => c.mac = v,
                "serial" => c.serial = v,
                "af" => c.af = v,
                other => return Err(err(format!("unknown stage `{other}`"))),
            }
        }
        Ok(c)
    }
}

/// Sum over layers and stages of cycles times the stage coefficient; also
/// stored in the report.
pub fn energy_estimate(report: &mut CycleReport, coeffs: &EnergyCoefficients) -> Result<f64, SimError> {
    for (stage, value) in [("mac", coeffs.mac), ("serial", coeffs.serial), ("af", coeffs.af)] {
        if value.is_nan() || value < 0.0 {
            return Err(SimError::NegativeCoefficient { stage, value });
        }
    }
    let e = report
        .layers
        .iter()
        .map(|l| l.mac_cycles as f64 * coeffs.mac + l.serial_cycles as f64 * coeffs.serial + l.af_cycles as f64 * coeffs.af)
        .sum();
    report.energy_j = Some(e);
    Ok(e)
}
