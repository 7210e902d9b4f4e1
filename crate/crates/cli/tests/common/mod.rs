#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use certds::learner::TrajectoryDataset;
use certds::poly::{Polynomial, PolynomialVector};
use certds::synth::rollout_dataset;
use certds_cli::csvio::write_dataset;

pub fn certds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certds"))
        .args(args)
        .env_remove("CERTDS_OUTPUT_DIR")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

/// `xdot = -x` rollouts from three starts near (-1, 0.5).
pub fn decay_dataset() -> TrajectoryDataset {
    let f = PolynomialVector::new(vec![
        Polynomial::var(2, 0).scale(-1.0),
        Polynomial::var(2, 1).scale(-1.0),
    ])
    .unwrap();
    let starts = [vec![-1.0, 0.4], vec![-0.9, 0.6], vec![-1.1, 0.5]];
    rollout_dataset(&f, &starts, 0.1, 40).unwrap()
}

pub fn decay_csv(dir: &Path) -> PathBuf {
    write(dir, "decay.csv", &write_dataset(&decay_dataset()))
}

/// Ball obstacle away from the decay data, in original coordinates.
pub fn far_ball(dir: &Path) -> PathBuf {
    write(
        dir,
        "ball.json",
        r#"{"kind": "ball", "center": [0.8, 0.8], "radius": 0.25}"#,
    )
}

/// Parse, serialize, parse: the second parse must reproduce the first.
pub fn assert_json_fixed_point<T>(text: &str)
where
    T: serde::de::DeserializeOwned + serde::Serialize,
{
    let a: T = serde_json::from_str(text).expect("parses");
    let s1 = serde_json::to_string(&a).unwrap();
    let b: T = serde_json::from_str(&s1).expect("reparses");
    assert_eq!(serde_json::to_string(&b).unwrap(), s1);
}
