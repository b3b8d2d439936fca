use std::path::PathBuf;

use pbsrd::cli::{dispatch, RunManifest};

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(name).display().to_string()
}

#[test]
fn calibrate_prints_lambda() {
    assert_eq!(dispatch(["pbsrd", "calibrate", "--kwm", "1", "--gamma", "100", "--eps", "0.1", "--dim", "3"]), 0);
    assert_eq!(dispatch(["pbsrd", "calibrate", "--kwm=-1", "--gamma", "100", "--eps", "0.1", "--dim", "3"]), 1);
}

#[test]
fn missing_model_and_bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    assert_eq!(dispatch(["pbsrd", "simulate", "--model", "/nonexistent/model.toml", "--out", &out]), 1);
    assert_eq!(dispatch(["pbsrd", "simulate", "--bogus"]), 2);
    assert_eq!(dispatch(["pbsrd", "frobnicate"]), 2);
}

#[test]
fn pide_writes_fields_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let m = model("reversible_binding.toml");
    let code = dispatch(["pbsrd", "pide", "--model", &m, "--grid", "64", "--dt", "0.01", "--t-end", "0.1", "--out", &out]);
    assert_eq!(code, 0);
    let fields = std::fs::read_to_string(dir.path().join("fields.csv")).unwrap();
    let mut lines = fields.lines();
    assert_eq!(lines.next(), Some("time,species,x,density"));
    // two recorded times, three species, 64 nodes
    assert_eq!(lines.count(), 2 * 3 * 64);
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.outputs.len(), 1);
    assert!(manifest.config_sha256.is_some());
}

#[test]
fn simulate_rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let m = model("dimerization.toml");
    let args = ["pbsrd", "simulate", "--model", &m, "--dt", "0.01", "--t-end", "0.2", "--seed", "3", "--replicas", "3"];
    let mut argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    argv.extend(["--out".to_string(), first.display().to_string()]);
    assert_eq!(dispatch(argv), 0);
    for f in ["counts.csv", "snapshots.csv", "events.csv", "manifest.json"] {
        assert!(first.join(f).exists(), "{f} missing");
    }
    let counts = std::fs::read_to_string(first.join("counts.csv")).unwrap();
    assert!(counts.starts_with("time,replica,species,count\n0,0,A,200\n"));
    let manifest = first.join("manifest.json").display().to_string();
    assert_eq!(dispatch(["pbsrd", "rerun", "--manifest", &manifest, "--out", &second.display().to_string()]), 0);
    for f in ["counts.csv", "snapshots.csv", "events.csv"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap());
    }
}

#[test]
fn kolmogorov_writes_survival() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let m = model("two_particle.toml");
    let code =
        dispatch(["pbsrd", "kolmogorov", "--model", &m, "--grid", "32", "--dt", "0.01", "--t-end", "0.1", "--out", &out]);
    assert_eq!(code, 0);
    let survival = std::fs::read_to_string(dir.path().join("survival.csv")).unwrap();
    let last = survival.lines().last().unwrap();
    let s: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!(s > 0.0 && s < 1.0);
    // the birth-death model is outside the forward-equation solver's scope
    let m = model("birth_death.toml");
    assert_eq!(dispatch(["pbsrd", "kolmogorov", "--model", &m, "--out", &out]), 1);
}
