use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn rtmap(args: &[&str], config: &str) -> (Output, TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_rtmap"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, dir, out)
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn build_on_defaults_passes_and_writes_manifest() {
    let (o, _tmp, out) = rtmap(&["build"], "");
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    let entries = manifest.as_array().unwrap();
    let names: Vec<&str> = entries.iter().map(|e| e["file"].as_str().unwrap()).collect();
    assert!(names.contains(&"build.json") && names.contains(&"config.toml"));
    for e in entries {
        let bytes = read(&out, e["file"].as_str().unwrap());
        assert_eq!(e["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
    let build: serde_json::Value = serde_json::from_slice(&read(&out, "build.json")).unwrap();
    assert_eq!(build["multiplier"], 32);
    assert_eq!(build["surgery"]["det_q1"], 224.0);
}

#[test]
fn orbit_csv_schema() {
    let (o, _tmp, out) = rtmap(&["orbit"], "[verification]\norbit_steps = 10\n");
    assert_eq!(o.status.code(), Some(0));
    let csv = text(&read(&out, "orbit.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,x0,y");
    assert_eq!(lines.len(), 12);
    assert!(lines[1].starts_with("0,0.3,0.7"));
}

#[test]
fn coverage_csv_and_heatmap() {
    let (o, _tmp, out) = rtmap(&["unstable-coverage"], "");
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
    let csv = text(&read(&out, "coverage.csv"));
    assert!(csv.starts_with("iterate,fraction\n0,"));
    assert_eq!(csv.lines().count(), 42);
    let pgm = read(&out, "coverage.pgm");
    let header = b"P5\n100 100\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 10_000);
}

#[test]
fn transitivity_on_product_control_fails() {
    let (o, _tmp, out) = rtmap(
        &["transitivity"],
        "[model]\nmap = \"product\"\n[verification]\ngrid_k = 16\nsamples_per_cell = 4\n",
    );
    assert_eq!(o.status.code(), Some(1), "{}", text(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "transitivity.json")).unwrap();
    assert_eq!(report["report"]["strongly_connected"], false);
}

#[test]
fn critical_set_on_skew_reports_empty() {
    let (o, _tmp, out) = rtmap(&["critical-set"], "[model]\nmap = \"skew\"\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stdout).contains("empty critical set"), "{}", text(&o.stdout));
    assert_eq!(text(&read(&out, "critical_set.csv")), "");
}

#[test]
fn critical_set_on_singular_map_is_found() {
    let (o, _tmp, out) = rtmap(&["critical-set"], "");
    assert_eq!(o.status.code(), Some(0));
    let csv = text(&read(&out, "critical_set.csv"));
    assert!(csv.starts_with("x,y,det_residual\n"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn bad_delta_is_a_config_error() {
    let (o, _tmp, out) = rtmap(&["build"], "[surgery]\ndelta = 0.08\ntheta = 0.03\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("0<δ<2θ"), "{}", text(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn overlapping_blocks_are_a_config_error() {
    let (o, _tmp, _) = rtmap(&["build"], "[blending]\nv = [[0.04, 0.02]]\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("U_ε ∩ V_ε = ∅"), "{}", text(&o.stderr));
}

#[test]
fn usage_errors_exit_two() {
    let (o, _tmp, _) = rtmap(&["launch"], "");
    assert_eq!(o.status.code(), Some(2));
    let (o, _tmp, _) = rtmap(&["build"], "[base]\ndegree = \"two\"\n");
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_rtmap"))
        .args(["build", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cantor_and_fixed_points_pass() {
    let (o, _tmp, out) = rtmap(&["cantor"], "");
    assert_eq!(o.status.code(), Some(0));
    let csv = text(&read(&out, "cantor.csv"));
    assert!(csv.starts_with("depth,count,required,max_width,contraction\n0,2,2,"));
    let (o, _tmp, _) = rtmap(&["fixed-points"], "");
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
}

#[test]
fn stable_witnesses_pass_on_defaults() {
    let (o, _tmp, out) = rtmap(&["stable-witness", "--seed", "3"], "");
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "witnesses.json")).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["results"].as_array().unwrap().len(), 10);
}

#[test]
fn sweep_rows_follow_the_seed() {
    let cfg = "[sweep]\ntrials = 3\ntransitivity_trials = 1\ngrid_k = 12\nsamples_per_cell = 5\n";
    let (o, _tmp, out) = rtmap(&["perturb-sweep", "--seed", "40"], cfg);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
    let csv = text(&read(&out, "sweep.csv"));
    assert_eq!(
        csv,
        "trial,seed,singular_pass,transitive_pass\n0,40,true,true\n1,41,true,\n2,42,true,\n"
    );
}

#[test]
fn sweep_needs_the_singular_map() {
    let (o, _tmp, _) = rtmap(&["perturb-sweep"], "[model]\nmap = \"skew\"\n[sweep]\ntrials = 1\n");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = "[verification]\ngrid_k = 12\nsamples_per_cell = 4\n";
    for cmd in ["orbit", "unstable-coverage", "critical-set", "transitivity"] {
        let (a, _t1, out1) = rtmap(&[cmd, "--seed", "11"], cfg);
        let (b, _t2, out2) = rtmap(&[cmd, "--seed", "11"], cfg);
        assert_eq!(a.status.code(), b.status.code());
        assert_eq!(read(&out1, "manifest.json"), read(&out2, "manifest.json"), "{cmd}");
    }
}
