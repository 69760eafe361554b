use proptest::prelude::*;
use uavaccel::app::{
    curve_csv, evaluate, extract_features, golden_model, metrics, parse_report_json, report_json, selftest,
    snr_sweep, synthetic_dataset, ConfusionMatrix, GOLDEN_FEATURE,
};
use uavaccel::nn::ForwardOptions;

proptest! {
    #[test]
    fn metric_algebra(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
        let cm = ConfusionMatrix { tp, fp, fn_, tn };
        prop_assume!(cm.total() > 0);
        let r = metrics(&cm).unwrap();
        prop_assert!((r.accuracy - (tp + tn) as f64 / cm.total() as f64).abs() < 1e-12);
        if r.precision + r.recall > 0.0 {
            prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-12);
        }
        if fp + tn > 0 {
            let specificity = tn as f64 / (fp + tn) as f64;
            prop_assert!((r.far + specificity - 1.0).abs() < 1e-12);
        }
        for v in [r.accuracy, r.precision, r.recall, r.f1, r.far, r.mdr] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn clean_sweep_equals_plain_evaluation() {
    let m = golden_model().unwrap();
    let segs = synthetic_dataset(40, 5);
    let opts = ForwardOptions::default();
    let plain = evaluate(&m, &extract_features(&segs, GOLDEN_FEATURE).unwrap(), &opts).unwrap();
    let curve = snr_sweep(&m, &segs, &[f64::INFINITY], 1, GOLDEN_FEATURE, &opts).unwrap();
    assert_eq!(curve[0].report, plain);
}

#[test]
fn sweeps_repeat_exactly() {
    let m = golden_model().unwrap();
    let segs = synthetic_dataset(30, 6);
    let opts = ForwardOptions::default();
    let a = snr_sweep(&m, &segs, &[10.0, -5.0], 9, GOLDEN_FEATURE, &opts).unwrap();
    let b = snr_sweep(&m, &segs, &[10.0, -5.0], 9, GOLDEN_FEATURE, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(curve_csv(&a), curve_csv(&b));
    assert!(curve_csv(&a).starts_with("snr_db,accuracy,far,mdr\n10,"));
}

#[test]
fn report_json_round_trips() {
    let m = golden_model().unwrap();
    let segs = synthetic_dataset(20, 7);
    let opts = ForwardOptions::default();
    let mut r = evaluate(&m, &extract_features(&segs, GOLDEN_FEATURE).unwrap(), &opts).unwrap();
    r.curve = snr_sweep(&m, &segs, &[f64::INFINITY, 0.0], 3, GOLDEN_FEATURE, &opts).unwrap();
    let text = report_json(&r);
    assert!(text.contains("\"clean\""));
    assert_eq!(parse_report_json(&text).unwrap(), r);
}

#[test]
fn selftest_passes() {
    for c in selftest() {
        assert!(c.result.is_ok(), "{}: {:?}", c.name, c.result);
    }
}
