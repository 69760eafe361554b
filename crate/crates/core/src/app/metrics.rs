//! Binary detection metrics with UAV as the positive class.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::AppError;
use crate::sim::CycleReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Count one prediction; label 1 is UAV.
    pub fn record(&mut self, label: u8, predicted: u8) {
        match (label == 1, predicted == 1) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut cm = Self::default();
        for (l, p) in pairs {
            cm.record(l, p);
        }
        cm
    }
}

/// Rates whose denominator was zero and were defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegenerateDenominator {
    pub precision: bool,
    pub recall: bool,
    pub far: bool,
    pub mdr: bool,
}

impl DegenerateDenominator {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.far || self.mdr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    /// `f64::INFINITY` for the clean pass, written as `"clean"`.
    #[serde(serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub snr_db: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub far: f64,
    pub mdr: f64,
    pub degenerate: DegenerateDenominator,
    pub curve: Vec<SnrPoint>,
    pub cycles: Option<CycleReport>,
}

fn ser_snr<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("clean")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Snr {
        Db(f64),
        Label(String),
    }
    match Snr::deserialize(d)? {
        Snr::Db(v) => Ok(v),
        Snr::Label(s) => super::config::parse_snr(&s).map_err(serde::de::Error::custom),
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<EvalReport, AppError> {
    if cm.total() == 0 {
        return Err(AppError::EmptyMatrix);
    }
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let (precision, dp) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, dr) = ratio(cm.tp, cm.tp + cm.fn_);
    let (far, df) = ratio(cm.fp, cm.fp + cm.tn);
    let (mdr, dm) = ratio(cm.fn_, cm.fn_ + cm.tp);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        confusion: *cm,
        accuracy,
        precision,
        recall,
        f1,
        far,
        mdr,
        degenerate: DegenerateDenominator { precision: dp, recall: dr, far: df, mdr: dm },
        curve: Vec::new(),
        cycles: None,
    })
}
