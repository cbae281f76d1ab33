use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fdosc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdosc")).args(args).arg("--out-dir").arg(out).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn verdict_tag(report: &Value) -> &str {
    report["verdict"]["tag"].as_str().unwrap()
}

#[test]
fn harmonic_zeros_are_multiples_of_pi() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["integrate", "--preset", "harmonic"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let zeros = json(&dir.path().join("zeros.json"));
    let ts: Vec<f64> = zeros["zeros"]["zeros"].as_array().unwrap().iter().map(|z| z["t"].as_f64().unwrap()).collect();
    assert_eq!(ts.len(), 6);
    for (t, k) in ts.iter().zip(1..) {
        assert!((t - k as f64 * PI).abs() <= 1e-8, "{t}");
    }
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,phi,psi\n"));
    assert_eq!(zeros["config"]["name"], "harmonic");
}

#[test]
fn zero_horizon_gives_empty_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["integrate", "--preset", "harmonic", "--horizon", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let zeros = json(&dir.path().join("zeros.json"));
    assert!(zeros["zeros"]["zeros"].as_array().unwrap().is_empty());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() <= 2, "{csv}");
}

#[test]
fn malformed_expression_reports_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[equation]\nterms = [{ r = \"1 + * t\" }]\n[history]\ntheta = \"0\"\n[analysis]\nhorizon = 5\n").unwrap();
    let out = fdosc(&["integrate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("equation.terms[0].r") && err.contains("column 5"), "{err}");
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[analysis]\nhorizn = 5\n").unwrap();
    let out = fdosc(&["integrate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn delay_preset_is_certified_nonoscillatory() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["check", "--criterion", "thm31", "--preset", "delay-nonosc", "--require-verdict"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle = json(&dir.path().join("report_thm31.json"));
    assert_eq!(verdict_tag(&bundle["report"]), "certified_nonoscillatory");
    assert_eq!(bundle["tool"], "fdosc");
    assert_eq!(bundle["config"]["analysis"]["witness"], "1");
}

#[test]
fn step_preset_fails_the_second_interval_condition() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["check", "--criterion", "thm32", "--preset", "step-forced", "--require-verdict"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = &json(&dir.path().join("report_thm32.json"))["report"];
    assert_eq!(verdict_tag(report), "inconclusive");
    let v = report["hypotheses"].as_array().unwrap().iter().find(|h| h["id"] == "V").unwrap();
    assert_eq!(v["status"], "violated");
    assert!(report["cross_check"]["all_hit"].as_bool().unwrap());
}

#[test]
fn stronger_step_preset_is_certified_oscillatory() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["check", "--preset", "step-forced-strong", "--require-verdict"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = &json(&dir.path().join("report_thm32.json"))["report"];
    assert_eq!(verdict_tag(report), "certified_oscillatory");
    assert_eq!(report["cross_check"]["rows"].as_array().unwrap().len(), 20);
}

#[test]
fn interval_osc_reports_each_partition() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["interval-osc", "--preset", "step-forced-strong"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let bundle = json(&dir.path().join("interval_osc.json"));
    let reports = bundle["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 10);
    for (l, r) in reports.iter().enumerate() {
        assert_eq!(verdict_tag(r), "certified_oscillatory_on");
        let a = r["verdict"]["a"].as_f64().unwrap();
        assert!(a >= 3.0 * PI * l as f64 - 1e-9);
    }
}

#[test]
fn wong_preset_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["wong", "--preset", "wong-sine"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = &json(&dir.path().join("report_wong.json"))["report"];
    assert_eq!(verdict_tag(report), "certified_oscillatory");
}

#[test]
fn wong_is_derived_from_an_undeviated_equation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.toml");
    fs::write(&cfg, "[equation]\nf = \"sin(t)\"\nterms = [{ r = \"1\" }]\n[analysis]\nwindow = [0, 40]\n").unwrap();
    let out = fdosc(&["wong", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_reproduce_id_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["reproduce", "4.7"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown example id"));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["integrate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_delay_example_writes_zero_free_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdosc(&["reproduce", "3.1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sub = dir.path().join("reproduce-delay-nonosc");
    let bundle = json(&sub.join("bundle.json"));
    assert_eq!(bundle["zero_free"]["found"], true);
    assert_eq!(bundle["zero_free"]["horizon"], 300.0);
    let csv = fs::read_to_string(sub.join("trajectory.csv")).unwrap();
    let last: f64 = csv.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(last >= 300.0);
    for line in csv.lines().skip(1) {
        let phi: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(phi > 0.0);
    }
}

#[test]
fn reports_are_deterministic_and_seed_dependent() {
    let runs: Vec<Vec<u8>> = [7, 7, 8]
        .iter()
        .map(|seed| {
            let dir = tempfile::tempdir().unwrap();
            let s = seed.to_string();
            let out = fdosc(&["check", "--preset", "step-forced-strong", "--seed", &s], dir.path());
            assert_eq!(out.status.code(), Some(0));
            fs::read(dir.path().join("report_thm32.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2]);
}
