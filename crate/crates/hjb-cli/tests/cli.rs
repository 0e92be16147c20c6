//! End-to-end runs of the experiment driver through the library API and
//! the binary itself.

use hjb_cli::config::ExperimentConfig;
use hjb_cli::plots::{emit_plot_data, PlotKind};
use hjb_cli::suites::run_experiment;
use std::process::Command;

fn config_json(preset: &str, suites: &[&str], out_dir: &std::path::Path) -> String {
    serde_json::json!({
        "preset": preset,
        "suites": suites,
        "out_dir": out_dir,
        "seed": 7,
        "grid": {"extent": 2.0, "nodes": 101},
        "comparison_pairs": 5,
        "comparison_steps": 60,
    })
    .to_string()
}

fn load(config: &str) -> ExperimentConfig {
    serde_json::from_str(config).unwrap()
}

#[test]
fn lp_deterministic_blow_up_run_passes_with_closed_form_tau() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = load(&config_json(
        "lp_deterministic",
        &["validate", "oracles"],
        dir.path(),
    ));
    config.overrides.rho = Some(0.0);
    config.overrides.p = Some(2.0);
    config.overrides.horizon = Some(5.0);
    let record = run_experiment(&config).unwrap();
    assert!(record.all_passed, "{}", record.summary_json());
    let oracles = record.suites.iter().find(|s| s.name == "oracles").unwrap();
    let tau = oracles.metrics["tau"];
    assert!((tau - 3.0).abs() < 1e-3, "tau = {tau}");
    assert!(dir.path().join("blowup.json").exists());
    assert!(dir.path().join("trajectory.csv").exists());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn power_model_comparison_and_envelope_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    let config = load(&config_json(
        "power_model",
        &["validate", "barriers", "solve", "comparison", "convergence"],
        dir.path(),
    ));
    let record = run_experiment(&config).unwrap();
    assert!(record.all_passed, "{}", record.summary_json());
    let comparison = record
        .suites
        .iter()
        .find(|s| s.name == "comparison")
        .unwrap();
    assert!(comparison.metrics["max_violation"] <= 1e-10);
    // envelope artifact has the numerical solution between the barriers
    let envelope = std::fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    for line in envelope.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[2] - 1e-9 <= cols[1] && cols[1] <= cols[3] + 1e-9, "{line}");
    }
}

#[test]
fn empty_suite_selection_yields_a_valid_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = load(&config_json("power_model", &[], dir.path()));
    let record = run_experiment(&config).unwrap();
    assert!(record.all_passed);
    assert!(record.suites.is_empty());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["all_passed"], serde_json::json!(true));
}

fn strip_wall_clock(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("wall_ms");
            for v in map.values_mut() {
                strip_wall_clock(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_wall_clock(v);
            }
        }
        _ => {}
    }
}

#[test]
fn identical_configs_reproduce_identical_summaries() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let suites = ["validate", "barriers", "comparison"];
    let mut a = load(&config_json("briand_hu", &suites, dir_a.path()));
    let mut b = load(&config_json("briand_hu", &suites, dir_b.path()));
    a.comparison_pairs = 3;
    b.comparison_pairs = 3;
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    let mut summary_a: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir_a.path().join("summary.json")).unwrap(),
    )
    .unwrap();
    let mut summary_b: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir_b.path().join("summary.json")).unwrap(),
    )
    .unwrap();
    strip_wall_clock(&mut summary_a);
    strip_wall_clock(&mut summary_b);
    // out_dir differs by construction; everything else must agree
    summary_a["config"]["out_dir"] = serde_json::json!(null);
    summary_b["config"]["out_dir"] = serde_json::json!(null);
    assert_eq!(summary_a, summary_b);
}

#[test]
fn a_failing_suite_does_not_stop_later_ones() {
    let dir = tempfile::tempdir().unwrap();
    // eq3_lq marks solve applicable through the controlled short run; the
    // comparison suite is skipped-but-recorded, and validate still runs
    let config = load(&config_json(
        "eq3_lq",
        &["validate", "barriers", "solve", "comparison"],
        dir.path(),
    ));
    let record = run_experiment(&config).unwrap();
    assert_eq!(record.suites.len(), 4);
    // whatever the verdicts, every suite has a record and the summary exists
    assert!(dir.path().join("summary.json").exists());
    let names: Vec<&str> = record.suites.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, vec!["validate", "barriers", "solve", "comparison"]);
}

#[test]
fn plot_emission_covers_the_artifact_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = load(&config_json(
        "lp_deterministic",
        &["oracles", "solve"],
        dir.path(),
    ));
    config.overrides.rho = Some(0.0);
    config.overrides.horizon = Some(5.0);
    run_experiment(&config).unwrap();
    let record = dir.path().join("summary.json");

    let blowup = emit_plot_data(&record, PlotKind::Blowup).unwrap();
    assert_eq!(blowup.len(), 2);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&blowup[1]).unwrap()).unwrap();
    assert!((meta["tau"].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert!(meta["tau_quadrature"].as_f64().is_some());

    let profiles = emit_plot_data(&record, PlotKind::Profiles).unwrap();
    let body = std::fs::read_to_string(&profiles[0]).unwrap();
    assert!(body.starts_with("x1,t,value\n"));

    // convergence artifact is absent in this run
    assert!(emit_plot_data(&record, PlotKind::Convergence).is_err());
}

#[test]
fn convergence_plot_table_has_three_rows_with_orders() {
    let dir = tempfile::tempdir().unwrap();
    let config = load(&config_json("power_model", &["convergence"], dir.path()));
    run_experiment(&config).unwrap();
    let record = dir.path().join("summary.json");
    let paths = emit_plot_data(&record, PlotKind::Convergence).unwrap();
    let table = std::fs::read_to_string(&paths[0]).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4, "{table}");
    assert_eq!(lines[0], "h,error,observed_order");
    let last: Vec<&str> = lines[3].split(',').collect();
    let order: f64 = last[2].parse().unwrap();
    assert!(order >= (1.7f64).log2(), "observed order {order}");
}

#[test]
fn binary_run_presets_and_plot_work_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        serde_json::json!({
            "preset": "lp_deterministic",
            "overrides": {"rho": 0.0, "horizon": 5.0},
            "suites": ["validate", "oracles"],
            "out_dir": dir.path().join("out"),
            "seed": 3,
        })
        .to_string(),
    )
    .unwrap();

    let run = Command::new(env!("CARGO_BIN_EXE_hjb"))
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );

    let presets = Command::new(env!("CARGO_BIN_EXE_hjb"))
        .args(["presets"])
        .output()
        .unwrap();
    assert!(presets.status.success());
    let listing = String::from_utf8_lossy(&presets.stdout);
    for name in hjb_core::problem::PRESET_NAMES {
        assert!(listing.contains(name), "{listing}");
    }

    let plot = Command::new(env!("CARGO_BIN_EXE_hjb"))
        .args(["plot", "--what", "blowup", "--record"])
        .arg(dir.path().join("out/summary.json"))
        .output()
        .unwrap();
    assert!(plot.status.success());
}

#[test]
fn out_dir_environment_override_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        serde_json::json!({
            "preset": "power_model",
            "suites": ["validate"],
            "out_dir": dir.path().join("ignored"),
            "seed": 1,
        })
        .to_string(),
    )
    .unwrap();
    let override_dir = dir.path().join("override");
    let run = Command::new(env!("CARGO_BIN_EXE_hjb"))
        .env(hjb_cli::config::OUT_DIR_ENV, &override_dir)
        .args(["run", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(run.status.success());
    assert!(override_dir.join("summary.json").exists());
    assert!(!dir.path().join("ignored").exists());
}
