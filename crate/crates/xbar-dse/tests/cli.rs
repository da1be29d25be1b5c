use std::path::Path;
use std::process::Command;

use xbar_dse::cli::main_with;
use xbar_dse::desk::{self, DeskSpec, FitConfig};
use xbar_dse::formats::{assets_dir, load_dataset, load_model};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("xbar-dse").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn parse_sm(csv: &str) -> Vec<(usize, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn single_cell_solve() {
    let out = ok(&["solve", "--tech", "fefet", "--rows", "1", "--cols", "1", "--input", "1", "--weight", "1"]);
    assert!(out.starts_with("column 0: 4.1165 µA"), "{out}");
}

#[test]
fn compare_is_byte_identical() {
    let a = ok(&["compare", "--seed", "7", "--rows", "16", "--cols", "16"]);
    let b = ok(&["compare", "--seed", "7", "--rows", "16", "--cols", "16", "--threads", "1"]);
    assert_eq!(a, b);
    assert!(a.contains("\"median\""));
}

#[test]
fn drain_margin_does_not_exceed_gate_margin() {
    let base = ["sm", "--tech", "sram", "--rows", "16", "--cols", "16", "--topology"];
    let drain = parse_sm(&ok(&[&base[..], &["drain"]].concat()));
    let gate = parse_sm(&ok(&[&base[..], &["gate"]].concat()));
    for x in 1..=4 {
        let d = drain.iter().find(|p| p.0 == x).unwrap().1;
        let g = gate.iter().find(|p| p.0 == x).unwrap().1;
        assert!(d <= g, "x={x}: drain {d} > gate {g}");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let (code, _, err) = run(&["nf", "--tech", "reram", "--rows", "4", "--cols", "4"]);
    assert_eq!(code, 1);
    assert!(err.contains("seed"), "{err}");

    let (code, _, err) = run(&["solve", "--input", "1", "--weight", "1", "-s", "eval.sampels=3"]);
    assert_eq!(code, 1);
    assert!(err.contains("eval.samples"), "{err}");

    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 1);
}

#[test]
fn numerical_failure_exits_with_two() {
    let exe = env!("CARGO_BIN_EXE_xbar-dse");
    let status = Command::new(exe)
        .args(["solve", "--tech", "reram", "--rows", "2", "--cols", "2", "--input", "1", "--weight", "1"])
        .args(["-s", "device.fidelity=level1", "-s", "eval.solver.max_iterations=1"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(exe).arg("--version").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}

#[test]
fn outputs_are_not_overwritten_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["solve", "--rows", "2", "--cols", "2", "--input", "1", "--weight", "1", "-o", out];
    ok(&args);
    let (code, _, err) = run(&args);
    assert_eq!(code, 1);
    assert!(err.contains("exists"), "{err}");
    ok(&[&args[..], &["--force"]].concat());
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "nf", "--tech", "reram", "--rows", "8", "--cols", "8", "--samples", "30", "--seed", "5", "-o",
        a.to_str().unwrap(),
    ]);
    let manifest = a.join("manifest.json");
    ok(&["nf", "--config", manifest.to_str().unwrap(), "-o", b.to_str().unwrap()]);
    let c = dir.path().join("c");
    ok(&["replay", manifest.to_str().unwrap(), "-o", c.to_str().unwrap()]);
    for f in ["nf_samples.csv", "nf_summary.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
        assert_eq!(read(&a, f), read(&c, f), "{f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    assert_eq!(m["format"], "xbar-run-manifest");
    assert_eq!(m["seed"], 5);
}

#[test]
fn bundled_assets_match_regeneration() {
    let b = desk::bundle(&DeskSpec::default(), &FitConfig::default());
    let dir = assets_dir();
    let model = load_model(&dir.join("desk_mlp.json")).unwrap();
    let test = load_dataset(&dir.join("desk_test.json")).unwrap();
    let train = load_dataset(&dir.join("desk_train.json")).unwrap();
    assert_eq!(model, b.model);
    assert_eq!(test, b.test);
    assert_eq!(train, b.train);
    assert!(desk::accuracy(&model, &test) >= 0.9);
}
