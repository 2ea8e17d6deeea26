use std::path::Path;
use std::process::{Command, Output};

use csa_core::geometry::{Domain, Point};
use csa_core::io::write_sequence;
use csa_core::params::BetaVector;
use csa_core::simulator::PointSequence;
use serde_json::Value;

fn csa(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csa"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("CSA_OUT_DIR")
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_then_estimate_gives_reference_magnitudes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = csa(out, &["simulate", "--R", "0.01", "--beta", "1000,10000", "--l", "1000", "--seed", "7", "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("sequence.svg").exists());
    let seq = out.join("sequence.csv");
    let o = csa(out, &["estimate", seq.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("estimate.json"));
    assert_eq!(report["kind"], "estimate");
    let beta: Vec<f64> = serde_json::from_value(report["data"]["fit"]["beta_hat"].clone()).unwrap();
    assert!((300.0..3000.0).contains(&beta[0]), "{beta:?}");
    assert!((3000.0..30000.0).contains(&beta[1]), "{beta:?}");
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["tool"], "csa");
}

#[test]
fn vanishing_t1_exits_with_numerical_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let mut seq = PointSequence::from_points(
        Domain::unit_square(),
        0.05,
        (0..5).map(|i| Point::xy(-0.4 + 0.2 * i as f64, 0.1)).collect(),
    );
    seq.beta = Some(BetaVector::new(vec![5.0]).unwrap());
    let path = dir.path().join("spread.csv");
    write_sequence(&path, &seq).unwrap();
    let o = csa(dir.path(), &["estimate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no positive MLE for β₁"), "{}", stderr(&o));
}

#[test]
fn hard_core_run_replays_to_all_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = csa(out, &["simulate", "--R", "0.03", "--until-jamming", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = csa(out, &["replay", out.join("sequence.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("replay.json"));
    let t: Vec<u64> = serde_json::from_value(report["data"]["t"].clone()).unwrap();
    assert_eq!(t.len(), 1);
    assert!(t[0] > 100);
}

#[test]
fn identical_invocations_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        let o = csa(out, &["simulate", "--R", "0.05", "--beta", "3,9", "--l", "150", "--seed", "11"]);
        assert!(o.status.success());
        let o = csa(out, &["estimate", out.join("sequence.csv").to_str().unwrap()]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(3));
    }
    for f in ["sequence.csv", "estimate.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_csa"))
        .args(["simulate", "--R", "0.05", "--l", "10"])
        .env("CSA_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("sequence.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(csa(out, &["simulate", "--R", "0.05"]).status.code(), Some(1));
    assert_eq!(csa(out, &["simulate", "--R", "0.05", "--beta", "-1", "--l", "3"]).status.code(), Some(1));
    assert_eq!(csa(out, &["--help"]).status.code(), Some(0));

    let missing = out.join("nope.csv");
    let o = csa(out, &["replay", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).trim().lines().count(), 1);

    let bad = out.join("bad.csv");
    std::fs::write(&bad, "index,x,y\n0,0.1,oops\n").unwrap();
    assert_eq!(csa(out, &["estimate", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn render_and_minors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(csa(out, &["simulate", "--R", "0.05", "--beta", "2", "--l", "40"]).status.success());
    let o = csa(out, &["render", out.join("sequence.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(out.join("sequence.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 40);

    let o = csa(out, &["experiment", "minors", "--cases", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&out.join("minors.json"));
    assert!(report["data"]["max_relative_error"].as_f64().unwrap() < 1e-10);
}
