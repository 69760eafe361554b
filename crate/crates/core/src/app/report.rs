//! Report files. Numbers are printed with fixed precision so reruns are
//! byte-identical.

use std::fs;
use std::path::Path;

use super::metrics::{EvalReport, SnrPoint};
use super::AppError;
use crate::sim::CycleReport;

fn snr_label(s: f64) -> String {
    if s.is_infinite() {
        "clean".into()
    } else {
        format!("{s}")
    }
}

pub fn metrics_csv(r: &EvalReport) -> String {
    let c = r.confusion;
    format!(
        "accuracy,precision,recall,f1,far,mdr,tp,fp,fn,tn\n{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}\n",
        r.accuracy, r.precision, r.recall, r.f1, r.far, r.mdr, c.tp, c.fp, c.fn_, c.tn
    )
}

pub fn curve_csv(curve: &[SnrPoint]) -> String {
    let mut out = String::from("snr_db,accuracy,far,mdr\n");
    for p in curve {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            snr_label(p.snr_db),
            p.report.accuracy,
            p.report.far,
            p.report.mdr
        ));
    }
    out
}

pub fn render_text(r: &EvalReport) -> String {
    let c = r.confusion;
    let mut out = String::from("UAV detection report\n\n");
    out.push_str(&format!("records    {}\n", c.total()));
    out.push_str(&format!("confusion  tp={} fp={} fn={} tn={}\n", c.tp, c.fp, c.fn_, c.tn));
    for (name, v, flag) in [
        ("accuracy", r.accuracy, false),
        ("precision", r.precision, r.degenerate.precision),
        ("recall", r.recall, r.degenerate.recall),
        ("f1", r.f1, false),
        ("far", r.far, r.degenerate.far),
        ("mdr", r.mdr, r.degenerate.mdr),
    ] {
        out.push_str(&format!("{name:<10} {v:.4}{}\n", if flag { "  (empty denominator)" } else { "" }));
    }
    if !r.curve.is_empty() {
        out.push_str("\nSNR sweep\n  snr_db  accuracy  far     mdr\n");
        for p in &r.curve {
            out.push_str(&format!(
                "  {:>6}  {:.4}    {:.4}  {:.4}\n",
                snr_label(p.snr_db),
                p.report.accuracy,
                p.report.far,
                p.report.mdr
            ));
        }
    }
    if let Some(cy) = &r.cycles {
        out.push_str(&format!("\nschedule   {}\ncycles     {}\n", cy.mode, cy.total_cycles));
        if let Some(s) = cy.latency_s {
            out.push_str(&format!("latency    {:.6} ms (compute only)\n", s * 1e3));
        }
        if let Some(e) = cy.energy_j {
            out.push_str(&format!("energy     {e:.6e} J\n"));
        }
    }
    out
}

/// Write `report.txt`, `metrics.csv`, `report.json`, and `curve_snr.csv` /
/// `cycles.txt` when the report carries a curve / cycle report.
pub fn write_report(dir: &Path, r: &EvalReport) -> Result<(), AppError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), render_text(r))?;
    fs::write(dir.join("metrics.csv"), metrics_csv(r))?;
    fs::write(dir.join("report.json"), report_json(r))?;
    if !r.curve.is_empty() {
        fs::write(dir.join("curve_snr.csv"), curve_csv(&r.curve))?;
    }
    if let Some(c) = &r.cycles {
        write_cycles(dir, c)?;
    }
    Ok(())
}

pub fn write_cycles(dir: &Path, c: &CycleReport) -> Result<(), AppError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("cycles.txt"), c.to_text())?;
    fs::write(dir.join("cycles.json"), c.to_json())?;
    Ok(())
}

pub fn report_json(r: &EvalReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

pub fn parse_report_json(text: &str) -> Result<EvalReport, AppError> {
    serde_json::from_str(text).map_err(|e| AppError::Config { line: e.line(), msg: e.to_string() })
}

pub fn parse_cycles_json(text: &str) -> Result<CycleReport, AppError> {
    serde_json::from_str(text).map_err(|e| AppError::Config { line: e.line(), msg: e.to_string() })
}
