use std::collections::BTreeMap;

use super::{QuantError, SensitivityReport};
use crate::numerics::PrecisionKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssignRule {
    /// Layers with `s_l > threshold` get the high precision.
    Threshold(f64),
    /// The `budget` most sensitive layers get the high precision.
    Budget(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignPolicy {
    pub rule: AssignRule,
    pub high: PrecisionKind,
    pub low: PrecisionKind,
}

impl AssignPolicy {
    pub fn budget(budget: usize) -> Self {
        Self { rule: AssignRule::Budget(budget), high: PrecisionKind::Bf16, low: PrecisionKind::Int8 }
    }

    pub fn threshold(tau: f64) -> Self {
        Self { rule: AssignRule::Threshold(tau), high: PrecisionKind::Bf16, low: PrecisionKind::Int8 }
    }

    pub fn with_low(mut self, low: PrecisionKind) -> Self {
        self.low = low;
        self
    }
}

/// Layer id to precision, one entry per scored layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAssignment {
    pub map: BTreeMap<usize, PrecisionKind>,
    pub policy: AssignPolicy,
}

impl PrecisionAssignment {
    pub fn get(&self, layer: usize) -> Option<PrecisionKind> {
        self.map.get(&layer).copied()
    }

    /// `layer_id precision` per line.
    pub fn to_text(&self) -> String {
        self.map.iter().map(|(l, p)| format!("{l} {p}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<BTreeMap<usize, PrecisionKind>, QuantError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| QuantError::Parse { line: i + 1, msg };
            let mut it = line.split_whitespace();
            let (Some(id), Some(p), None) = (it.next(), it.next(), it.next()) else {
                return Err(err(format!("expected 'layer_id precision', got '{line}'")));
            };
            let id: usize = id.parse().map_err(|_| err(format!("bad layer id '{id}'")))?;
            let p: PrecisionKind = p.parse().map_err(err)?;
            if map.insert(id, p).is_some() {
                return Err(err(format!("layer {id} listed twice")));
            }
        }
        Ok(map)
    }
}

pub fn assign_precisions(
    report: &SensitivityReport,
    policy: AssignPolicy,
) -> Result<PrecisionAssignment, QuantError> {
    let entries = &report.entries;
    let mut map: BTreeMap<usize, PrecisionKind> =
        entries.iter().map(|e| (e.layer, policy.low)).collect();
    match policy.rule {
        AssignRule::Threshold(tau) => {
            for e in entries.iter().filter(|e| e.s_l > tau) {
                map.insert(e.layer, policy.high);
            }
        }
        AssignRule::Budget(budget) => {
            if budget > entries.len() {
                return Err(QuantError::PolicyBudgetExceedsLayerCount {
                    budget,
                    layers: entries.len(),
                });
            }
            let mut order: Vec<_> = entries.iter().collect();
            order.sort_by(|a, b| b.s_l.total_cmp(&a.s_l).then(a.layer.cmp(&b.layer)));
            for e in order.into_iter().take(budget) {
                map.insert(e.layer, policy.high);
            }
        }
    }
    Ok(PrecisionAssignment { map, policy })
}
