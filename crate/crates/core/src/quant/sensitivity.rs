use super::{fake_quantize, QuantError, WeightQuantConfig};

/// Sensitivity of one weighted layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityEntry {
    pub layer: usize,
    pub s_sc16: f64,
    pub s_sc8: f64,
    /// `max(s_sc16, s_sc8)`.
    pub s_l: f64,
    pub grad_norm: f64,
    pub n_l: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensitivityReport {
    pub entries: Vec<SensitivityEntry>,
}

impl SensitivityReport {
    /// One line per layer: `layer s_l s_sc16 s_sc8 grad_norm n_l`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# layer s_l s_sc16 s_sc8 grad_norm n_l\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{} {:e} {:e} {:e} {:e} {}\n",
                e.layer, e.s_l, e.s_sc16, e.s_sc8, e.grad_norm, e.n_l
            ));
        }
        out
    }
}

fn error_norm(w: &[f32], cfg: &WeightQuantConfig) -> Result<f64, QuantError> {
    let q = fake_quantize(w, cfg)?;
    Ok(q.iter()
        .zip(w)
        .map(|(&qv, &wv)| (qv - f64::from(wv)).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Score a layer by how much the 16- and 8-bit scaled quantizers improve on
/// the base quantizer, weighted by the loss-gradient norm and normalised by
/// the layer size. Errors are L2 norms measured in the weight domain.
pub fn layer_sensitivity(
    layer: usize,
    w: &[f32],
    grad_norm: f64,
    base: &WeightQuantConfig,
    cfg16: &WeightQuantConfig,
    cfg8: &WeightQuantConfig,
) -> Result<SensitivityEntry, QuantError> {
    if w.is_empty() {
        return Err(QuantError::EmptyTensor);
    }
    if !(grad_norm.is_finite() && grad_norm >= 0.0) {
        return Err(QuantError::InvalidGradNorm(grad_norm));
    }
    let n_l = w.len();
    let base_err = error_norm(w, base)?;
    let score = |cfg: &WeightQuantConfig| -> Result<f64, QuantError> {
        Ok((base_err - error_norm(w, cfg)?) * grad_norm / n_l as f64)
    };
    let s_sc16 = score(cfg16)?;
    let s_sc8 = score(cfg8)?;
    Ok(SensitivityEntry { layer, s_sc16, s_sc8, s_l: s_sc16.max(s_sc8), grad_norm, n_l })
}

/// Score every weighted layer of `m`: base is the nominal 8-bit quantizer
/// (`k = 1`), variants are the scaled 16- and 8-bit quantizers.
pub fn model_sensitivity(m: &crate::nn::ModelSpec, grads: &[(usize, f64)]) -> Result<SensitivityReport, QuantError> {
    let entries = m
        .weighted_layers()
        .into_iter()
        .map(|i| {
            let g = grads.iter().find(|(l, _)| *l == i).map(|e| e.1).ok_or(QuantError::MissingGradNorm(i))?;
            let w = &m.layers[i].weights;
            let base = WeightQuantConfig::nominal(w, 8)?;
            let cfg16 = WeightQuantConfig::scaled(w, 16)?;
            let cfg8 = WeightQuantConfig::scaled(w, 8)?;
            layer_sensitivity(i, w, g, &base, &cfg16, &cfg8)
        })
        .collect::<Result<_, _>>()?;
    Ok(SensitivityReport { entries })
}

/// Parse `layer_id grad_norm` records; blank lines and `#` comments are
/// skipped.
pub fn parse_grad_norms(text: &str) -> Result<Vec<(usize, f64)>, QuantError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| QuantError::Parse { line: i + 1, msg };
        let mut fields = line.split_whitespace();
        let (Some(id), Some(g), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(format!("expected 'layer_id grad_norm', got '{line}'")));
        };
        let id: usize = id.parse().map_err(|_| err(format!("bad layer id '{id}'")))?;
        let g: f64 = g.parse().map_err(|_| err(format!("bad gradient norm '{g}'")))?;
        if !(g.is_finite() && g >= 0.0) {
            return Err(err(format!("gradient norm must be finite and >= 0, got {g}")));
        }
        out.push((id, g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights() -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        (0..256).map(|_| rng.random_range(-1.0f32..1.0)).collect()
    }

    /// Straight-line evaluation of the score, written without the library
    /// quantizer.
    fn oracle(w: &[f32], g: f64) -> (f64, f64) {
        let n = w.len() as f64;
        let mean_abs: f64 = w.iter().map(|v| f64::from(v.abs())).sum::<f64>() / n;
        let mut mags: Vec<f64> = w.iter().map(|v| f64::from(v.abs())).collect();
        mags.sort_by(f64::total_cmp);
        let p999 = mags[((0.999 * n).ceil() as usize) - 1];
        let err = |bits: i32, k: f64| {
            let k = k as f32 as f64;
            let bound = (p999 / k) as f32 as f64;
            let lv = 2f64.powi(bits) - 1.0;
            let mut acc = 0.0;
            for &wi in w {
                let c = (f64::from(wi) / k).clamp(-bound, bound);
                let code = ((c + bound) * lv / (2.0 * bound)).round_ties_even();
                let q = k * (code * (2.0 * bound) / lv - bound);
                acc += (q - f64::from(wi)).powi(2);
            }
            acc.sqrt()
        };
        let base = err(8, 1.0);
        let k16 = mean_abs * 65535.0 / 32768.0;
        let k8 = mean_abs * 255.0 / 128.0;
        ((base - err(16, k16)) * g / n, (base - err(8, k8)) * g / n)
    }

    #[test]
    fn matches_straight_line_oracle() {
        let w = weights();
        let base = WeightQuantConfig::nominal(&w, 8).unwrap();
        let c16 = WeightQuantConfig::scaled(&w, 16).unwrap();
        let c8 = WeightQuantConfig::scaled(&w, 8).unwrap();
        let e = layer_sensitivity(3, &w, 0.75, &base, &c16, &c8).unwrap();
        let (o16, o8) = oracle(&w, 0.75);
        assert!((e.s_sc16 - o16).abs() <= 1e-12, "{} vs {}", e.s_sc16, o16);
        assert!((e.s_sc8 - o8).abs() <= 1e-12, "{} vs {}", e.s_sc8, o8);
        assert_eq!(e.s_l, e.s_sc16.max(e.s_sc8));
        assert!(e.s_sc16 > 0.0);
        assert_eq!(e.n_l, 256);
    }

    #[test]
    fn zero_gradient_and_identical_quantizers() {
        let w = weights();
        let base = WeightQuantConfig::nominal(&w, 8).unwrap();
        let c16 = WeightQuantConfig::scaled(&w, 16).unwrap();
        let e = layer_sensitivity(0, &w, 0.0, &base, &c16, &base).unwrap();
        assert_eq!(e.s_l, 0.0);
        let e = layer_sensitivity(0, &w, 5.0, &base, &base, &base).unwrap();
        assert_eq!((e.s_sc16, e.s_sc8, e.s_l), (0.0, 0.0, 0.0));
        assert_eq!(
            layer_sensitivity(0, &[], 1.0, &base, &base, &base),
            Err(QuantError::EmptyTensor)
        );
        assert!(layer_sensitivity(0, &w, -1.0, &base, &base, &base).is_err());
    }

    #[test]
    fn finer_variant_scores_non_negative() {
        let w = weights();
        let base = WeightQuantConfig::nominal(&w, 4).unwrap();
        let c16 = WeightQuantConfig::nominal(&w, 16).unwrap();
        let c8 = WeightQuantConfig::nominal(&w, 8).unwrap();
        let e = layer_sensitivity(0, &w, 2.0, &base, &c16, &c8).unwrap();
        assert!(e.s_sc16 >= 0.0 && e.s_sc8 >= 0.0);
    }

    #[test]
    fn grad_norm_file() {
        let text = "# layer grad\n0 0.5\n\n3 1e-2  # trailing\n";
        assert_eq!(parse_grad_norms(text).unwrap(), vec![(0, 0.5), (3, 0.01)]);
        assert!(matches!(parse_grad_norms("0\n"), Err(QuantError::Parse { line: 1, .. })));
        assert!(matches!(parse_grad_norms("0 -1\n"), Err(QuantError::Parse { .. })));
        assert!(matches!(parse_grad_norms("x 1\n"), Err(QuantError::Parse { .. })));
    }
}
