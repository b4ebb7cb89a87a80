use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sigctl::paths::read_csv;

fn sigctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigctl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write_config(dir: &Path, value: Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn stable_reports_golden_misses_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigctl(&["stable", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["pass"], false);
    assert_eq!(s["failures"].as_array().unwrap().len(), 4);
    let checks = std::fs::read_to_string(dir.path().join("golden_checks.csv")).unwrap();
    assert!(checks.starts_with("table,t,state,computed,golden,deviation,pass"));
    assert_eq!(checks.lines().count(), 121);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn stable_depth_four_keeps_depth_two_coefficients() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    sigctl(&["stable", "--out", a.path().to_str().unwrap()]);
    sigctl(&["stable", "--depth", "4", "--out", b.path().to_str().unwrap()]);
    let read = |d: &Path| std::fs::read_to_string(d.join("signature_table.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn json_format_emits_json_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigctl(&["stable", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let table: Vec<Vec<f64>> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("value_table.json")).unwrap()).unwrap();
    assert_eq!(table.len(), 6);
    assert!((table[4][0] - 18.34).abs() < 0.01);
}

#[test]
fn bellman_check_passes() {
    let out = sigctl(&["bellman-check"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["pass"], true);
}

#[test]
fn chen_opt_single_candidate_matches_table_entry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"experiment": "chen-opt", "branch_state": 8, "time": 2, "candidates": [2]}),
    );
    let out = sigctl(&["chen-opt", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert!((s["best_cost"].as_f64().unwrap() - 3.43).abs() < 0.01);
}

#[test]
fn chen_opt_default_lists_every_candidate() {
    let out = sigctl(&["chen-opt"]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&out);
    let costs: Vec<f64> = s["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["cost"].as_f64().unwrap())
        .collect();
    assert_eq!(costs.len(), 3);
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(s["best_cost"].as_f64().unwrap(), min);
}

#[test]
fn error_explosion_labels_both_errors() {
    let out = sigctl(&["error-explosion"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert!((s["coefficient_perturbation_error"].as_f64().unwrap() - 4.52).abs() < 0.01);
    assert!((s["dynamics_misspecification_error"].as_f64().unwrap() - 147.96).abs() < 0.05);
}

#[test]
fn error_explosion_without_errors_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"experiment": "error-explosion", "start": [2.0, 1.2], "n_steps": 9,
                           "eps": 0.0, "depth": 10, "coefficient_error": 0.0}),
    );
    let out = sigctl(&["error-explosion", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    assert_eq!(s["coefficient_perturbation_error"].as_f64().unwrap(), 0.0);
    assert_eq!(s["dynamics_misspecification_error"].as_f64().unwrap(), 0.0);
}

#[test]
fn kernel_profile_starts_at_zero_and_tracks_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = sigctl(&["kernel-profile", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("profile.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows[0][1..].iter().all(|v| *v == 0.0));
    for r in &rows {
        let (pde, exact) = (r[col("linear_1d_linear")], r[col("linear_1d_exact")]);
        assert!((pde - exact).abs() <= 1e-3 * (1.0 + exact));
    }
    // both sinusoids are back at zero at t = 1 and t = 2, so the 1D distance vanishes
    let (t, sine_1d) = (col("t"), col("sine_1d_linear"));
    for r in rows.iter().filter(|r| (r[t] - 1.0).abs() < 1e-9 || (r[t] - 2.0).abs() < 1e-9) {
        assert!(r[sine_1d].abs() < 1e-6);
    }
}

#[test]
fn similar_path_with_unit_scale_reproduces_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({"experiment": "similar-path",
                           "reference": {"kind": "parabola", "x_min": -1.0, "x_max": 1.0, "n_nodes": 20},
                           "depth": 4, "alpha": 1.0, "step_size": 0.01, "iterations": 20}),
    );
    let out = sigctl(&["similar-path", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(summary(&out)["final_cost"].as_f64().unwrap() < 1e-3);
}

#[test]
fn track_trajectory_round_trips_to_past_signature() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(include_str!("../presets/springdamper_d2.json")).unwrap();
    cfg["max_time"] = 3.0.into();
    let cfg = write_config(dir.path(), cfg);
    let out_dir = dir.path().join("out");
    let out = sigctl(&["track", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out);
    let executed = read_csv(out_dir.join("trajectory.csv")).unwrap();
    // the past starts at the reference origin
    let mut points = vec![vec![0.0; 5]];
    points.extend(executed.points().iter().cloned());
    let sig = sigctl::PiecewisePath::new(points).unwrap().signature(2);
    let logged = s["past_signature"]["levels"].as_array().unwrap();
    let logged: Vec<f64> = logged
        .iter()
        .flat_map(|l| l.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()))
        .collect();
    for (a, b) in sig.flatten().iter().zip(&logged) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn track_overrides_depth_and_disturbance() {
    let dir = tempfile::tempdir().unwrap();
    let run = |depth: &str, w: &str| {
        let out_dir = dir.path().join(format!("d{depth}w{w}"));
        let out = sigctl(&[
            "track", "--preset", "springdamper_d2", "--depth", depth, "--disturbance", w,
            "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        summary(&out)["final_state"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect::<Vec<f64>>()
    };
    let d1 = run("1", "0.03");
    let preset_d1: Value = summary(&sigctl(&["track", "--preset", "springdamper_d1"]));
    let preset_d1: Vec<f64> = preset_d1["final_state"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(d1, preset_d1);
    assert_ne!(run("2", "0.0"), run("2", "0.03"));
    assert_eq!(sigctl(&["track", "--depth", "2"]).status.code(), Some(1));
}

#[test]
fn track_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(include_str!("../presets/pointmass.json")).unwrap();
    cfg["max_time"] = 5.0.into();
    let cfg = write_config(dir.path(), cfg);
    let a = sigctl(&["track", "--config", &cfg, "--seed", "7"]);
    let b = sigctl(&["track", "--config", &cfg, "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn mismatched_config_and_unknown_preset_exit_one() {
    let out = sigctl(&["track", "--preset", "stable"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not `track`"));
    let out = sigctl(&["stable", "--preset", "missing"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn presets_are_listed() {
    let out = sigctl(&["presets"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "pointmass\ttrack"));
    assert_eq!(text.lines().count(), 10);
}
