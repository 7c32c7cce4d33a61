use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use stirap_cli::config::SweepKind;
use stirap_cli::{Campaign, PRESETS};
use stirap_core::Level;

fn stirap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stirap"))
        .args(args)
        .env_remove("STIRAP_OUT")
        .env_remove("STIRAP_JOBS")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Value {
    let out = stirap(args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary is json")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn checksums(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["file"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

fn error_record(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is a json error record")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL_TRACE: &str = r#"
campaign = "simulate"
title = "small trace"

[protocol]
base = "detuned_pi"

[system]
steps = 400

[simulate]
initial_states = ["0", "1"]
samples = 40
eigen_overlaps = true
"#;

#[test]
fn catalog_has_a_validated_preset_per_panel() {
    assert!(PRESETS.len() >= 12);
    let names: BTreeSet<_> = PRESETS.iter().map(|p| p.name).collect();
    for panel in ["fig1c", "fig1d", "fig2a", "fig2b", "fig2c", "fig2d", "fig3d", "fig4a", "fig4b", "fig6a", "fig6b"] {
        assert!(names.contains(panel), "{panel}");
    }
    for panel in ["fig9a", "fig9b", "fig9c", "fig9d"] {
        assert!(names.contains(panel), "{panel}");
    }
    for p in PRESETS {
        let config = p.config().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        assert!(!p.citation().is_empty());
        if config.campaign == Campaign::Sweep && config.sweep.as_ref().unwrap().kind == SweepKind::Robustness {
            assert!(!config.sweep.as_ref().unwrap().axes.is_empty());
        }
    }
}

#[test]
fn overlap_preset_declares_both_initial_states() {
    let config = stirap_cli::preset("fig2b").unwrap().config().unwrap();
    let sim = config.simulate.unwrap();
    assert_eq!(sim.initial_states, vec![Level::Zero, Level::One]);
    assert!(sim.eigen_overlaps);
}

#[test]
fn presets_subcommand_lists_and_shows() {
    let out = stirap(&["presets", "list"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), PRESETS.len());
    let out = stirap(&["presets", "show", "fig4a"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("campaign = \"calibrate\""));
    let out = stirap(&["presets", "show", "nope"]);
    assert!(!out.status.success());
    assert_eq!(error_record(&out)["kind"], "usage");
}

#[test]
fn amplitude_calibration_preset_emits_six_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_ok(&["calibrate", "--preset", "fig4a", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(out.join("amplitude_sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# fig4a"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let curves = header.iter().filter(|c| c.contains("_from_")).count();
    assert_eq!(curves, 6, "{header:?}");
    assert_eq!(lines.count(), 61);
}

#[test]
fn identical_config_and_seed_reproduce_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_TRACE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_ok(&["simulate", "--config", &config, "--out", dir.to_str().unwrap(), "--seed", "3", "--emit-plot-script"]);
    }
    assert_eq!(checksums(&a), checksums(&b));
    assert_eq!(manifest(&a)["config_sha256"], manifest(&b)["config_sha256"]);
    assert_eq!(manifest(&a)["seed"], 3);
}

#[test]
fn tomography_noise_follows_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
campaign = "tomography"
seed = 1

[system]
steps = 400

[tomography]
targets = ["pi_from_0"]
pi_amplitude = { min = 15.0, max = 25.0, points = 21 }
half_pi_amplitude = { min = 5.0, max = 15.0, points = 21 }
phase = { min = 0.0, max = 3.141592653589793, points = 13 }

[tomography.measurement]
shot_noise_sigma = 0.01
"#;
    let config = write_config(tmp.path(), text);
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (dir, seed) in dirs.iter().zip(["5", "5", "6"]) {
        run_ok(&["tomography", "--config", &config, "--out", dir.to_str().unwrap(), "--seed", seed]);
    }
    assert_eq!(checksums(&dirs[0]), checksums(&dirs[1]));
    assert_ne!(checksums(&dirs[0]), checksums(&dirs[2]));
}

#[test]
fn manifest_lists_every_emitted_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_TRACE);
    let out = tmp.path().join("run");
    let summary = run_ok(&["simulate", "--config", &config, "--out", out.to_str().unwrap(), "--emit-plot-script"]);
    let listed: BTreeSet<String> = checksums(&out).into_iter().map(|(f, _)| f).collect();
    let on_disk: BTreeSet<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != "manifest.json")
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(summary["files"], listed.len());
    let recipe: Value = serde_json::from_str(&fs::read_to_string(out.join("plot_recipe.json")).unwrap()).unwrap();
    for panel in recipe["panels"].as_array().unwrap() {
        for s in panel["series"].as_array().unwrap() {
            assert!(listed.contains(s["file"].as_str().unwrap()));
        }
    }
    let trace = fs::read_to_string(out.join("trace_from_1.csv")).unwrap();
    assert!(trace.lines().nth(1).unwrap().contains("ov_dark"));
}

#[test]
fn malformed_key_is_named_and_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &SMALL_TRACE.replace("base = ", "bse = "));
    let out = stirap(&["simulate", "--config", &config, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let record = error_record(&out);
    assert_eq!(record["status"], "error");
    assert_eq!(record["kind"], "config");
    assert_eq!(record["key"], "bse");
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn invalid_value_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &SMALL_TRACE.replace("samples = 40", "samples = 0"));
    let out = stirap(&["simulate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["key"], "simulate.samples");
}

#[test]
fn subcommand_must_match_campaign() {
    let out = stirap(&["sweep", "--preset", "fig1c", "--out", "/nonexistent/never"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["key"], "campaign");
}

#[test]
fn environment_sets_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL_TRACE);
    let out_dir = tmp.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_stirap"))
        .args(["simulate", "--config", &config, "--jobs", "2"])
        .env("STIRAP_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(&out_dir)["threads"], 2);
}
