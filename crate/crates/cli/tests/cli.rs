use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavaccel"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["selftest"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn two_layer_profile_takes_eight_cycles() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "l1 3 1\nl2 4 1\n").unwrap();
    let o = run(dir.path(), &["simulate", "--profile", "p.txt"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().any(|l| l == "total_cycles=8"), "{}", stdout(&o));
    assert!(dir.path().join("out/cycles.json").exists());

    let o = run(dir.path(), &["simulate", "--profile", "p.txt", "--mode", "parallel"]);
    assert!(stdout(&o).lines().any(|l| l == "total_cycles=4"), "{}", stdout(&o));
}

#[test]
fn canonical_prunes_to_target() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["prune", "--model", "builtin:canonical", "--target-flatten", "8704"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("flatten_dim 35072 -> 8704"), "{}", stdout(&o));
    let record = fs::read_to_string(dir.path().join("out/prune.txt")).unwrap();
    assert_eq!(record.lines().filter(|l| !l.starts_with('#')).count(), 206);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "model=builtin:canonical\nprune_target=8704\nout=cfgout\n").unwrap();
    let o = run(dir.path(), &["--config", "run.cfg", "prune"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("cfgout/model.s8uv").exists());

    fs::write(dir.path().join("bad.cfg"), "colour=blue\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", "bad.cfg", "selftest"])), 1);
}

#[test]
fn usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("junk.s8fv"), b"not a feature file").unwrap();
    fs::write(p.join("bad_profile.txt"), "l1 x 1\n").unwrap();
    for args in [
        &["frobnicate"][..],
        &["prune", "--model", "builtin:canonical"],
        &["quantize", "--model", "builtin:golden", "--precision", "int8"],
        &["simulate", "--mode", "sideways", "--profile", "x"],
        &["sweep", "--snr", "1,zz"],
        &["eval", "--model", "builtin:nothing", "--dataset", "junk.s8fv"],
    ] {
        assert_eq!(code(&run(p, args)), 1, "{args:?}");
    }
    for args in [
        &["eval", "--model", "builtin:golden", "--dataset", "junk.s8fv"][..],
        &["eval", "--model", "missing.s8uv", "--dataset", "junk.s8fv"],
        &["simulate", "--profile", "bad_profile.txt"],
        &["prune", "--model", "builtin:canonical", "--target-flatten", "7"],
    ] {
        assert_eq!(code(&run(p, args)), 2, "{args:?}");
    }
}

#[test]
fn pipeline_is_reproducible() {
    let outputs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path();
            let steps: [&[&str]; 5] = [
                &["--seed", "11", "extract", "--synthetic", "24", "--output", "feat.s8fv"],
                &["--out", "q", "quantize", "--model", "builtin:golden", "--calibration", "feat.s8fv", "--precision", "fxp8"],
                &["--out", "p", "prune", "--model", "q/model.s8uv", "--target-channels", "12"],
                &["--out", "p", "infer", "--model", "p/model.s8uv", "--dataset", "feat.s8fv"],
                &["--out", "p", "eval", "--model", "p/model.s8uv", "--dataset", "feat.s8fv", "--cycles"],
            ];
            for s in steps {
                let o = run(p, s);
                assert_eq!(code(&o), 0, "{s:?}: {}", String::from_utf8_lossy(&o.stderr));
            }
            ["feat.s8fv", "q/model.s8uv", "p/model.s8uv", "p/prune.txt", "p/predictions.csv", "p/report.json", "p/metrics.csv"]
                .iter()
                .map(|f| (f.to_string(), fs::read(p.join(f)).unwrap()))
                .collect()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn malformed_invocations_never_succeed(
        sub in prop::sample::select(vec!["extract", "augment", "quantize", "sensitivity", "prune", "infer", "simulate", "eval", "sweep"]),
        junk in "--[a-z]{3,8}",
        val in "[a-z0-9]{0,6}",
    ) {
        let dir = tempfile::tempdir().unwrap();
        let o = run(dir.path(), &[sub, &junk, &val]);
        let c = code(&o);
        prop_assert!(c == 1 || c == 2, "{sub} {junk} {val} exited {c}");
    }

    #[test]
    fn corrupt_profiles_are_data_errors(bytes in prop::collection::vec(any::<u8>(), 1..64)) {
        let dir = tempfile::tempdir().unwrap();
        let mut text = b"l1 ".to_vec();
        text.extend(bytes.iter().map(|b| if b.is_ascii_digit() { b'q' } else { *b }));
        fs::write(dir.path().join("p.txt"), &text).unwrap();
        let c = code(&run(dir.path(), &["simulate", "--profile", "p.txt"]));
        prop_assert!(c == 2, "exit {c}");
    }
}
