use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dlcz_core::config::ExperimentConfig;
use serde_json::Value;
use tempfile::TempDir;

fn dlcz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlcz")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = dlcz(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fails_with(args: &[&str], code: i32) -> String {
    let o = dlcz(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stderr).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> String {
    let path = dir.join(name);
    fs::write(&path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn preset() -> ExperimentConfig {
    ExperimentConfig::from_json(include_str!("../presets/paper.json")).unwrap()
}

/// `(concurrence, p10 + p01)` by plane from an analysis result.
fn planes(result: &Value) -> BTreeMap<String, (f64, f64)> {
    result["planes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let r = &e["restricted"];
            let s = r["p10"].as_f64().unwrap() + r["p01"].as_f64().unwrap();
            (e["plane"].as_str().unwrap().to_string(), (e["concurrence"]["C"].as_f64().unwrap(), s))
        })
        .collect()
}

#[test]
fn preset_round_trips_through_the_schema() {
    let cfg = preset();
    let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.to_json(), again.to_json());
    assert!((cfg.interferometer.bs1_t / (1.0 - cfg.interferometer.bs1_t) - 0.85).abs() < 1e-12);
    assert_eq!(cfg.channel, dlcz_core::entanglement::ChannelBudget::paper());
    cfg.with_window("w120").unwrap();
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let t = TempDir::new().unwrap();
    let (a, b, c) = (p(t.path(), "a"), p(t.path(), "b"), p(t.path(), "c"));
    ok(&["simulate", "--out", &a, "--trials", "100000", "--seed", "9"]);
    ok(&["simulate", "--out", &b, "--trials", "100000", "--seed", "9"]);
    ok(&["simulate", "--out", &c, "--trials", "100000", "--seed", "10"]);
    let outputs = |dir: &str| {
        let mut m = json(Path::new(dir).join("manifest.json"));
        m.as_object_mut().unwrap().retain(|k, _| !k.ends_with("_unix"));
        m
    };
    assert_eq!(outputs(&a), outputs(&b));
    for name in ["config.json", "states.json", "probabilities.csv", "records.csv", "records.json"] {
        let x = fs::read(Path::new(&a).join(name)).unwrap();
        assert_eq!(x, fs::read(Path::new(&b).join(name)).unwrap(), "{name}");
    }
    assert_ne!(fs::read(Path::new(&a).join("records.csv")).unwrap(), fs::read(Path::new(&c).join("records.csv")).unwrap());
    // the manifest hash is the hash of the file on disk
    let m = json(Path::new(&a).join("manifest.json"));
    for o in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(Path::new(&a).join(o["path"].as_str().unwrap())).unwrap();
        use sha2::Digest;
        assert_eq!(hex::encode(sha2::Sha256::digest(&bytes)), o["sha256"].as_str().unwrap());
    }
}

#[test]
fn ideal_config_probabilities_sum_to_one() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "ideal.json", &ExperimentConfig::ideal());
    let out = p(t.path(), "sim");
    ok(&["simulate", "--config", &cfg, "--out", &out, "--no-records"]);
    let text = fs::read_to_string(Path::new(&out).join("probabilities.csv")).unwrap();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        *sums.entry(format!("{}/{}", f[0], f[1])).or_default() += f[3].parse::<f64>().unwrap();
    }
    assert_eq!(sums.len(), 14);
    for (k, s) in sums {
        assert!((s - 1.0).abs() < 1e-10, "{k}: {s}");
    }
    assert!(!Path::new(&out).join("records.csv").exists());
}

#[test]
fn fringe_scan_has_thirteen_rows_per_arm_and_opposite_heralds() {
    let t = TempDir::new().unwrap();
    let out = p(t.path(), "fr");
    ok(&["fringe-scan", "--out", &out]);
    let text = fs::read_to_string(Path::new(&out).join("fringe.csv")).unwrap();
    let mut rows: BTreeMap<(String, String), usize> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        *rows.entry((f[0].to_string(), f[2].to_string())).or_default() += 1;
    }
    assert_eq!(rows.len(), 4);
    assert!(rows.values().all(|&n| n == 13), "{rows:?}");
    let fit = json(Path::new(&out).join("fringe_fit.json"));
    for h in fit["heralds"].as_array().unwrap() {
        let v = h["fit"]["visibility"].as_f64().unwrap();
        assert!((v - 0.70).abs() < 0.02, "V = {v}");
    }
    let off = fit["phase_offset"].as_f64().unwrap();
    let s = fit["sigma_phase_offset"].as_f64().unwrap();
    assert!((off.abs() - std::f64::consts::PI).abs() < 3.0 * s + 1e-9, "{off} ± {s}");
}

#[test]
fn fringe_visibility_follows_the_overlap() {
    let t = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::ideal();
    cfg.ensembles.left.chi = 0.01;
    cfg.ensembles.right.chi = 0.01;
    let ideal = write_config(t.path(), "ideal.json", &cfg);
    cfg.interferometer.overlap = 0.0;
    let distinguishable = write_config(t.path(), "lambda0.json", &cfg);
    let v = |config: &str, dir: &str| {
        let out = p(t.path(), dir);
        ok(&["fringe-scan", "--config", config, "--out", &out]);
        json(Path::new(&out).join("fringe_fit.json"))["heralds"][0]["expected_fit"]["visibility"].as_f64().unwrap()
    };
    assert!(v(&ideal, "a") > 0.98);
    assert!(v(&distinguishable, "b") < 0.01);
}

struct Analyzed {
    _dir: TempDir,
    result: Value,
    out: PathBuf,
}

fn simulate_and_analyze(herald: &str, extra: &[&str]) -> Analyzed {
    let t = TempDir::new().unwrap();
    let sim = p(t.path(), "sim");
    ok(&["simulate", "--out", &sim, "--herald", herald]);
    let out = t.path().join("an");
    let records = p(Path::new(&sim), "records.csv");
    let mut args = vec!["analyze", "--records", &records, "--out", out.to_str().unwrap(), "--herald", herald];
    args.extend_from_slice(extra);
    ok(&args);
    Analyzed { result: json(out.join("result.json")), out, _dir: t }
}

#[test]
fn preset_records_reproduce_the_detector_plane_concurrence() {
    for (herald, c0) in [("d1a", 2.4e-3), ("d1b", 1.9e-3)] {
        let a = simulate_and_analyze(herald, &["--coherence", "simplified"]);
        let c = a.result["concurrence"]["C"].as_f64().unwrap();
        assert!((c - c0).abs() < 0.6e-3, "{herald}: C = {c:e}");
        let h = a.result["witness"]["h_c2"].as_f64().unwrap();
        assert!(h < 1.0 && (h - 0.33).abs() < 0.08, "{herald}: h = {h}");
        let v = a.result["tomography"]["visibility"].as_f64().unwrap();
        assert!((v - 0.70).abs() < 0.02);
    }
}

#[test]
fn plane_z2_lands_in_the_ensemble_output_regime() {
    for (herald, c0) in [("d1a", 0.021), ("d1b", 0.016)] {
        let a = simulate_and_analyze(herald, &["--coherence", "simplified", "--plane", "z2", "--bootstrap", "2000"]);
        let target = &a.result["target"];
        assert_eq!(target["plane"], "z2");
        let c = target["concurrence"]["C"].as_f64().unwrap();
        assert!((c - c0).abs() < 0.006, "{herald}: C_z2 = {c}");
        let by_plane = planes(&a.result);
        assert!((by_plane["z2"].1 - 0.110).abs() < 0.005, "{herald}: {:?}", by_plane["z2"]);
        // concurrence grows going upstream
        let cs: Vec<f64> = ["detector", "z0", "z1", "z2"].iter().map(|k| by_plane[*k].0).collect();
        assert!(cs.windows(2).all(|w| w[0] < w[1]), "{cs:?}");
        let csv = fs::read_to_string(a.out.join("planes.csv")).unwrap();
        assert!(csv.starts_with("plane,herald,C,sigma_C,p00,p01,p10,p11,d_abs\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}

#[test]
fn backprop_reproduces_the_analysis_planes() {
    let a = simulate_and_analyze("d1a", &["--bootstrap", "0"]);
    let out = a.out.parent().unwrap().join("bp");
    let input = a.out.join("result.json");
    let stdout = ok(&["backprop", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--bootstrap", "0"]);
    assert!(stdout.contains("z2"));
    let bp = json(out.join("backprop.json"));
    let mine = planes(&serde_json::json!({ "planes": bp }));
    for (plane, (c, s)) in planes(&a.result) {
        let (c2, s2) = mine[&plane];
        assert!((c - c2).abs() < 1e-12 && (s - s2).abs() < 1e-12, "{plane}");
    }
    let only = a.out.parent().unwrap().join("bp1");
    ok(&["backprop", "--input", input.to_str().unwrap(), "--out", only.to_str().unwrap(), "--plane", "z0", "--bootstrap", "0"]);
    assert_eq!(json(only.join("backprop.json")).as_array().unwrap().len(), 2);
}

#[test]
fn mle_at_the_corrected_plane_agrees_with_two_stage() {
    let a = simulate_and_analyze("d1a", &["--mle", "--reference", "z0", "--bootstrap", "0"]);
    let ts = &a.result["concurrence"];
    let mle = &a.result["mle_concurrence"];
    let (c1, s1) = (ts["C"].as_f64().unwrap(), ts["sigma"].as_f64().unwrap());
    let (c2, s2) = (mle["C"].as_f64().unwrap(), mle["sigma"].as_f64().unwrap());
    assert!((c1 - c2).abs() < 2.0 * s1.hypot(s2), "{c1:e} ± {s1:e} vs {c2:e} ± {s2:e}");
    let m = &a.result["tomography"]["mle"];
    assert!(m["log_likelihood"].as_f64().unwrap() >= m["two_stage_log_likelihood"].as_f64().unwrap());
}

#[test]
fn empty_records_are_an_integrity_error() {
    let t = TempDir::new().unwrap();
    let empty = p(t.path(), "empty.csv");
    fs::write(&empty, "").unwrap();
    let err = fails_with(&["analyze", "--records", &empty, "--out", &p(t.path(), "o")], 3);
    assert!(err.contains("no count records"), "{err}");
    let empty_json = p(t.path(), "empty.json");
    fs::write(&empty_json, "[]").unwrap();
    fails_with(&["analyze", "--records", &empty_json, "--out", &p(t.path(), "o")], 3);
}

#[test]
fn malformed_csv_reports_its_line() {
    let t = TempDir::new().unwrap();
    let bad = p(t.path(), "bad.csv");
    fs::write(
        &bad,
        "# detectors=d2a;d2b;d2c\nphase_phi_radians,pattern_bits,count,trials,seed\n,000,90,100,1\n,100,ten,100,1\n",
    )
    .unwrap();
    let err = fails_with(&["analyze", "--records", &bad, "--out", &p(t.path(), "o")], 3);
    assert!(err.contains("line 4"), "{err}");
    let short = p(t.path(), "short.csv");
    fs::write(&short, "phase_phi_radians,pattern_bits,count,trials,seed\n,000,90,100,1\n").unwrap();
    let err = fails_with(&["analyze", "--records", &short, "--out", &p(t.path(), "o")], 3);
    assert!(err.contains("tally sums to 90"), "{err}");
}

#[test]
fn too_few_fringe_phases_are_a_fit_failure() {
    let t = TempDir::new().unwrap();
    let sim = p(t.path(), "sim");
    ok(&["simulate", "--out", &sim, "--trials", "100000"]);
    let mut records = json(Path::new(&sim).join("records.json"));
    records.as_array_mut().unwrap().truncate(4);
    let cut = p(t.path(), "cut.json");
    fs::write(&cut, records.to_string()).unwrap();
    let err = fails_with(&["analyze", "--records", &cut, "--out", &p(t.path(), "o")], 4);
    assert!(err.contains("ill-posed"), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let t = TempDir::new().unwrap();
    let mut v: Value = serde_json::from_str(&preset().to_json()).unwrap();
    v["ensembles"]["R"]["chi"] = 1.5.into();
    let path = p(t.path(), "bad.json");
    fs::write(&path, v.to_string()).unwrap();
    let err = fails_with(&["simulate", "--config", &path, "--out", &p(t.path(), "o")], 2);
    assert!(err.contains("ensembles.R.chi"), "{err}");
    v["ensembles"]["R"]["chi"] = 0.1.into();
    v["interferometer"]["bs1_T"] = 0.5.into();
    fs::write(&path, v.to_string()).unwrap();
    let err = fails_with(&["simulate", "--config", &path, "--out", &p(t.path(), "o")], 2);
    assert!(err.contains("interferometer.bs1_T"), "{err}");
    fails_with(&["simulate", "--config", &p(t.path(), "missing.json"), "--out", &p(t.path(), "o")], 1);
    let mut cfg = preset();
    cfg.windows.clear();
    let plain = write_config(t.path(), "plain.json", &cfg);
    let err = fails_with(&["simulate", "--config", &plain, "--window", "w120", "--out", &p(t.path(), "o")], 2);
    assert!(err.contains("windows.w120"), "{err}");
    fails_with(&["analyze", "--records", "x.csv", "--plane", "z9"], 2);
}
