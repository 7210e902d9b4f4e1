mod common;

use certds::learner::{Diagnostics, LearnConfig, LearnResult, ScalingRecord};
use certds::poly::{Polynomial, PolynomialVector};
use certds_cli::manifest::RunManifest;
use certds_cli::schema::{Metrics, ObstacleSpec, SetsFile, VerifyReport};
use common::*;

fn read(p: &std::path::Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn empty_dataset_is_a_schema_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "empty.csv", "");
    let out_dir = dir.path().join("out");
    let out = certds(&["learn", "--data", path_str(&data), "--output-dir", path_str(&out_dir)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.exists());
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = certds(&["learn", "--data", path_str(&dir.path().join("none.csv"))]);
    assert_eq!(code(&out), 5);
}

#[test]
fn unconstrained_learn_eval_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let data = decay_csv(dir.path());
    let out_dir = dir.path().join("run");
    let out = certds(&[
        "learn",
        "--data",
        path_str(&data),
        "--output-dir",
        path_str(&out_dir),
        "--deg-f",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let result_text = read(&out_dir.join("result.json"));
    assert_json_fixed_point::<LearnResult>(&result_text);
    assert_json_fixed_point::<SetsFile>(&read(&out_dir.join("sets.json")));
    assert_json_fixed_point::<RunManifest>(&read(&out_dir.join("manifest.json")));
    let result: LearnResult = serde_json::from_str(&result_text).unwrap();
    assert!(result.b.is_none());
    assert!(result.gram_certificates.iter().any(|c| c.label == "lyapunov_decrease"));

    let metrics_path = dir.path().join("metrics.json");
    let out = certds(&[
        "eval",
        "--result",
        path_str(&out_dir.join("result.json")),
        "--data",
        path_str(&data),
        "--output",
        path_str(&metrics_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics_text = read(&metrics_path);
    assert_json_fixed_point::<Metrics>(&metrics_text);
    let metrics: Metrics = serde_json::from_str(&metrics_text).unwrap();
    assert!((metrics.mse - result.mse).abs() <= 1e-12);
    assert_eq!(metrics.trajectories.len(), 3);
    assert!(metrics.barrier.is_none());

    let report_path = dir.path().join("report.json");
    let out = certds(&[
        "verify",
        "--result",
        path_str(&out_dir.join("result.json")),
        "--sets",
        path_str(&out_dir.join("sets.json")),
        "--samples",
        "2000",
        "--output",
        path_str(&report_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_json_fixed_point::<VerifyReport>(&read(&report_path));

    let out = certds(&[
        "verify",
        "--result",
        path_str(&out_dir.join("result.json")),
        "--sets",
        path_str(&out_dir.join("sets.json")),
        "--samples",
        "0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let result = write(
        dir.path(),
        "r.json",
        &serde_json::to_string(&planar_result(None)).unwrap(),
    );
    let data = write(dir.path(), "d.csv", "traj_id,t,x1\na,0,1\na,1,0.5\n");
    let out = certds(&["eval", "--result", path_str(&result), "--data", path_str(&data)]);
    assert_eq!(code(&out), 2);
}

/// `f = -x`, `V = |x|^2` with an optional barrier and no certificates.
fn planar_result(b: Option<Polynomial>) -> LearnResult {
    LearnResult {
        f: PolynomialVector::new(vec![
            Polynomial::var(2, 0).scale(-1.0),
            Polynomial::var(2, 1).scale(-1.0),
        ])
        .unwrap(),
        v: Polynomial::norm_squared(2),
        b,
        tau: Vec::new(),
        sigma: Vec::new(),
        phi: None,
        gram_certificates: Vec::new(),
        mse: 0.0,
        scaling: ScalingRecord::identity(2),
        config: LearnConfig::default(),
        diagnostics: Diagnostics::default(),
    }
}

#[test]
fn export_field_grid_values() {
    let dir = tempfile::tempdir().unwrap();
    let result = write(
        dir.path(),
        "r.json",
        &serde_json::to_string(&planar_result(None)).unwrap(),
    );
    let out = certds(&[
        "export-field",
        "--result",
        path_str(&result),
        "--box",
        "-1,1,-1,1",
        "--resolution",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(5).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    let corner = rows.iter().find(|r| r[0] == 1.0 && r[1] == 1.0).unwrap();
    assert_eq!((corner[2], corner[3]), (-1.0, -1.0));
    for r in &rows {
        assert_eq!(r[4], r[0] * r[0] + r[1] * r[1]);
    }
    assert!(text.lines().nth(1).unwrap().ends_with(','));

    let out = certds(&["export-field", "--result", path_str(&result), "--resolution", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn export_field_rejects_non_planar_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = planar_result(None);
    r.f = PolynomialVector::new((0..3).map(|k| Polynomial::var(3, k).scale(-1.0)).collect()).unwrap();
    r.v = Polynomial::norm_squared(3);
    r.scaling = ScalingRecord::identity(3);
    let result = write(dir.path(), "r.json", &serde_json::to_string(&r).unwrap());
    let out = certds(&["export-field", "--result", path_str(&result)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let result = write(
        dir.path(),
        "r.json",
        &serde_json::to_string(&planar_result(None)).unwrap(),
    );
    let out = certds(&[
        "simulate",
        "--result",
        path_str(&result),
        "--start",
        "1,-0.5",
        "--horizon",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2\n"));
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let decay = (-last[0]).exp();
    assert!((last[1] - decay).abs() < 1e-9 && (last[2] + 0.5 * decay).abs() < 1e-9);
}

#[test]
fn fit_obstacle_covers_square_and_splits_polygons() {
    let dir = tempfile::tempdir().unwrap();
    let square = write(dir.path(), "sq.json", r#"{"vertices": [[0,0],[1,0],[1,1],[0,1]]}"#);
    let out_dir = dir.path().join("obs");
    let out = certds(&[
        "fit-obstacle",
        "--polygon",
        path_str(&square),
        "--margin",
        "0.05",
        "--degree",
        "4",
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&out_dir.join("obstacle_0.json"));
    assert_json_fixed_point::<ObstacleSpec>(&text);
    let set = serde_json::from_str::<ObstacleSpec>(&text).unwrap().to_set().unwrap();
    for i in 0..=20 {
        for j in 0..=20 {
            let p = [i as f64 / 20.0, j as f64 / 20.0];
            assert!(set.contains(&p).unwrap(), "{p:?} not covered");
        }
    }

    let boxes = write(
        dir.path(),
        "two.json",
        r#"{"polygons": [[[0,0],[1,0],[1,1],[0,1]], [[3,0],[4,0],[4,1],[3,1]]]}"#,
    );
    let out_dir = dir.path().join("two");
    let out = certds(&[
        "fit-obstacle",
        "--polygon",
        path_str(&boxes),
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("obstacle_0.json").exists() && out_dir.join("obstacle_1.json").exists());
    assert!(!out_dir.join("obstacle_2.json").exists());

    let degenerate = write(dir.path(), "deg.json", r#"{"vertices": [[0,0],[1,0]]}"#);
    let out = certds(&[
        "fit-obstacle",
        "--polygon",
        path_str(&degenerate),
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn barrier_learn_verify_and_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let data = decay_csv(dir.path());
    let ball = far_ball(dir.path());
    let out_dir = dir.path().join("run");
    let out = certds(&[
        "learn",
        "--data",
        path_str(&data),
        "--obstacle",
        path_str(&ball),
        "--deg-f",
        "1",
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let result_path = out_dir.join("result.json");
    let sets_path = out_dir.join("sets.json");
    let verify = |result: &std::path::Path| {
        certds(&[
            "verify",
            "--result",
            path_str(result),
            "--sets",
            path_str(&sets_path),
            "--samples",
            "10000",
            "--rollouts",
            "20",
        ])
    };
    let out = verify(&result_path);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // Flip the sign of B: the certificates no longer match and B > 0 on X0.
    let mut r: LearnResult = serde_json::from_str(&read(&result_path)).unwrap();
    r.b = r.b.map(|b| b.scale(-1.0));
    let tampered = write(dir.path(), "tampered.json", &serde_json::to_string(&r).unwrap());
    let out = verify(&tampered);
    assert_eq!(code(&out), 4);
    let report: VerifyReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!report.certificates.passed);
    assert!(!report.falsification.condition("barrier_initial").unwrap().passed);

    // Replaying the manifest reproduces the result byte for byte.
    let replay_dir = dir.path().join("replay");
    let out = certds(&[
        "learn",
        "--manifest",
        path_str(&out_dir.join("manifest.json")),
        "--output-dir",
        path_str(&replay_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(&result_path).unwrap(),
        std::fs::read(replay_dir.join("result.json")).unwrap()
    );

    // A changed input file invalidates the manifest.
    std::fs::write(&data, read(&data).replace("traj_id", "traj_id ")).unwrap();
    let out = certds(&[
        "learn",
        "--manifest",
        path_str(&out_dir.join("manifest.json")),
        "--output-dir",
        path_str(&dir.path().join("stale")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sample_inside_obstacle_is_reported_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let data = decay_csv(dir.path());
    let ball = write(
        dir.path(),
        "ball.json",
        r#"{"kind": "ball", "center": [-1.0, 0.4], "radius": 0.05}"#,
    );
    let out = certds(&[
        "learn",
        "--data",
        path_str(&data),
        "--obstacle",
        path_str(&ball),
        "--output-dir",
        path_str(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("reference sample 0"));
}

#[test]
fn config_file_and_flags_layer_over_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = decay_csv(dir.path());
    let config = write(
        dir.path(),
        "cfg.json",
        r#"{"learner": {"deg_f": 3, "max_rounds": 2}, "subsample": 20}"#,
    );
    let out_dir = dir.path().join("run");
    let out = certds(&[
        "learn",
        "--data",
        path_str(&data),
        "--config",
        path_str(&config),
        "--deg-f",
        "1",
        "--output-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m: RunManifest = serde_json::from_str(&read(&out_dir.join("manifest.json"))).unwrap();
    assert_eq!(m.config.learner.deg_f, 1);
    assert_eq!(m.config.learner.max_rounds, 2);
    assert_eq!(m.config.learner.deg_v, LearnConfig::default().deg_v);
    assert_eq!(m.config.subsample, Some(20));

    let bad = write(dir.path(), "bad.json", r#"{"learner": {"degf": 3}}"#);
    let out = certds(&["learn", "--data", path_str(&data), "--config", path_str(&bad)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn output_dir_defaults_to_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let square = write(dir.path(), "sq.json", r#"{"vertices": [[0,0],[1,0],[1,1],[0,1]]}"#);
    let out_dir = dir.path().join("env-out");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_certds"))
        .args(["fit-obstacle", "--polygon", path_str(&square)])
        .env("CERTDS_OUTPUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(out_dir.join("obstacle_0.json").exists());
}
