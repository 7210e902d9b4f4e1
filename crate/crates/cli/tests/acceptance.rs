//! Acceptance suite: one PASS/FAIL line per criterion. The process fails if
//! any criterion fails.

mod common;

use std::time::{Duration, Instant};

use certds::dynsim::{falsify, rk4_step, safe_rollout_check};
use certds::learner::{
    learn, learn_unconstrained, make_initial_set, preprocess, verify_certificates, warm_start, LearnConfig, LearnError,
    LearnResult, TrajectoryDataset,
};
use certds::poly::{monomial_basis, Monomial, Polynomial, PolynomialVector};
use certds::sdp::{solve, LmiBlock, SdpProblem, SolveStatus, SolverOptions};
use certds::semialg::{ellipse_set, fit_unsafe_polynomial, BasicSemialgebraicSet, BoundingBox, Polygon2D};
use certds::sos::check_sos;
use certds::synth::{rollout_dataset, s_shape, stable_cubic};
use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn linear_field(a: [[f64; 2]; 2]) -> PolynomialVector {
    let row = |r: [f64; 2]| &Polynomial::var(2, 0).scale(r[0]) + &Polynomial::var(2, 1).scale(r[1]);
    PolynomialVector::new(vec![row(a[0]), row(a[1])]).unwrap()
}

fn criterion_1() -> (Outcome, Option<LearnResult>) {
    let a = [[0.0, 1.0], [-1.0, -1.0]];
    let starts = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let ds = rollout_dataset(&linear_field(a), &starts, 0.05, 99).unwrap();
    let start = Instant::now();
    let r = match warm_start(&ds, LearnConfig::default().eps3) {
        Ok(r) => r,
        Err(e) => return (outcome(false, format!("warm start failed: {e}")), None),
    };
    let elapsed = start.elapsed();
    let mut frob = 0.0;
    let mut learned = [[0.0; 2]; 2];
    for k in 0..2 {
        for j in 0..2 {
            let mut e = vec![0u32; 2];
            e[j] = 1;
            learned[k][j] = r.f.components()[k].coefficient(&Monomial::new(e));
            frob += (learned[k][j] - a[k][j]).powi(2);
        }
    }
    let frob = frob.sqrt();
    let eps3 = r.config.eps3;
    let m = DMatrix::from_fn(2, 2, |i, j| {
        -(learned[i][j] + learned[j][i]) - if i == j { 2.0 * eps3 } else { 0.0 }
    });
    let min_eig = SymmetricEigen::new(m).eigenvalues.min();
    let certified = verify_certificates(&r, None, &[]).is_ok();
    let passed =
        ds.num_samples() == 200 && frob <= 1e-2 && min_eig >= -1e-9 && certified && elapsed.as_secs_f64() < 5.0;
    (
        outcome(
            passed,
            format!(
                "{} samples, Frobenius error {frob:.2e}, min eig of -(A+A^T)-2eps3 I {min_eig:.2e}, certificates {}, {}",
                ds.num_samples(),
                if certified { "ok" } else { "rejected" },
                secs(elapsed)
            ),
        ),
        Some(r),
    )
}

fn criterion_2() -> (Outcome, Option<LearnResult>) {
    let starts: Vec<Vec<f64>> = (0..6)
        .map(|k| {
            let th = k as f64 * std::f64::consts::PI / 3.0 + 0.3;
            vec![1.5 * th.cos(), 1.5 * th.sin()]
        })
        .collect();
    let ds = rollout_dataset(&stable_cubic(), &starts, 0.05, 60).unwrap();
    let (nds, _) = preprocess(&ds, None).unwrap();
    let cfg = LearnConfig {
        deg_f: 3,
        deg_v: 2,
        ..LearnConfig::default()
    };
    let start = Instant::now();
    let r = match learn_unconstrained(&nds, &cfg) {
        Ok(r) => r,
        Err(e) => return (outcome(false, format!("learning failed: {e}")), None),
    };
    let elapsed = start.elapsed();
    let certified = verify_certificates(&r, None, &[]).is_ok();
    let passed = r.mse <= 1e-4 && r.diagnostics.rounds <= 10 && certified && elapsed.as_secs() < 120;
    (
        outcome(
            passed,
            format!(
                "normalized MSE {:.2e} after {} rounds, certificates {}, {}",
                r.mse,
                r.diagnostics.rounds,
                if certified { "ok" } else { "rejected" },
                secs(elapsed)
            ),
        ),
        Some(r),
    )
}

fn criterion_3(results: &[(&str, Option<&LearnResult>)]) -> Outcome {
    let domain = BoundingBox::symmetric(2, 1.0);
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, r) in results {
        let Some(r) = r else {
            passed = false;
            parts.push(format!("{name}: no result"));
            continue;
        };
        match falsify(r, None, &[], &domain, 10_000, 7) {
            Ok(rep) => {
                let bad: usize = ["lyapunov_positive", "lyapunov_decrease"]
                    .iter()
                    .map(|l| {
                        rep.condition(l)
                            .map_or(1, |c| c.counterexamples.len() + usize::from(!c.passed))
                    })
                    .sum();
                passed &= bad == 0;
                parts.push(format!("{name}: {bad} violations"));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(passed, parts.join(", "))
}

/// Learns the barrier scenario, escalating degrees once if allowed.
fn barrier_scenario(
    ds: &TrajectoryDataset,
    x0: &BasicSemialgebraicSet,
    xu: &[BasicSemialgebraicSet],
    escalate: bool,
) -> (Outcome, Option<LearnResult>) {
    let mut cfg = LearnConfig {
        deg_f: 5,
        deg_v: 2,
        deg_b: 4,
        ..LearnConfig::default()
    };
    let start = Instant::now();
    let mut note = String::new();
    let r = match learn(ds, x0, xu, &cfg) {
        Ok(r) => r,
        Err(e) => {
            let suggestion = match &e {
                LearnError::Infeasible { suggestion, .. } | LearnError::NotCertified { suggestion, .. } => {
                    Some(suggestion.clone())
                }
                _ => None,
            };
            match suggestion.filter(|_| escalate) {
                Some(s) => {
                    note = format!("default degrees failed ({e}); escalated to {s}; ");
                    cfg.deg_f = s.deg_f;
                    cfg.deg_v = s.deg_v;
                    cfg.deg_b = s.deg_b;
                    match learn(ds, x0, xu, &cfg) {
                        Ok(r) => r,
                        Err(e) => return (outcome(false, format!("{note}escalation failed: {e}")), None),
                    }
                }
                None => return (outcome(false, format!("learning failed: {e}")), None),
            }
        }
    };
    let elapsed = start.elapsed();
    let certs = verify_certificates(&r, Some(x0), xu);
    let min_eig = r
        .gram_certificates
        .iter()
        .map(|c| c.certificate.min_eigenvalue())
        .fold(f64::INFINITY, f64::min);
    let b = r.b.as_ref().expect("barrier result");
    let max_b = ds.samples().map(|s| b.eval(&s.x)).fold(f64::NEG_INFINITY, f64::max);
    let roll = safe_rollout_check(&r, x0, xu, 100, 1e-3, 20.0, 3);
    let (roll_ok, roll_text) = match &roll {
        Ok(rep) => (
            rep.passed && rep.barrier_crossings == 0,
            format!("rollouts pass {} with {} crossings", rep.passed, rep.barrier_crossings),
        ),
        Err(e) => (false, format!("rollouts failed: {e}")),
    };
    let passed = certs.is_ok() && min_eig >= -1e-8 && max_b <= 1e-9 && roll_ok && elapsed.as_secs() < 15 * 60;
    (
        outcome(
            passed,
            format!(
                "{note}degrees f {} V {} B {}, {} certificates (min eig {min_eig:.2e}{}), max B on data {max_b:.2e}, {roll_text}, MSE {:.2e}, {}",
                cfg.deg_f,
                cfg.deg_v,
                cfg.deg_b,
                r.gram_certificates.len(),
                certs.as_ref().err().map_or(String::new(), |e| format!(", {e}")),
                r.mse,
                secs(elapsed)
            ),
        ),
        Some(r),
    )
}

fn s_data() -> (TrajectoryDataset, BasicSemialgebraicSet) {
    let ds = s_shape(&[0.45, 0.5, 0.55], 100).unwrap();
    let x0 = make_initial_set(&ds, 0.02).unwrap();
    (ds, x0)
}

fn criterion_4() -> (Outcome, Option<LearnResult>) {
    let (ds, x0) = s_data();
    let xu = vec![ellipse_set([-0.3, -0.25], [0.12, 0.08], 0.0).unwrap()];
    barrier_scenario(&ds, &x0, &xu, false)
}

/// U opening upwards; the troughs of the S curves dip into its mouth.
fn u_polygon() -> Polygon2D {
    Polygon2D::new(vec![
        [-1.05, -0.95],
        [-0.45, -0.95],
        [-0.45, -0.47],
        [-0.53, -0.47],
        [-0.53, -0.85],
        [-0.97, -0.85],
        [-0.97, -0.47],
        [-1.05, -0.47],
    ])
    .unwrap()
}

fn criterion_5() -> Outcome {
    let (ds, x0) = s_data();
    let poly = u_polygon();
    // The data must enter the convex hull of the U (its bounding box here,
    // since the U is a box with a notch).
    let bb = poly.bounding_box();
    let inside_hull = ds
        .samples()
        .filter(|s| bb.contains(&s.x) && !poly.contains([s.x[0], s.x[1]]))
        .count();
    let fit = match fit_unsafe_polynomial(&poly, 0.01, 4, 60) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("obstacle fit failed: {e}")),
    };
    let (o, _) = barrier_scenario(&ds, &x0, &[fit.set], true);
    outcome(
        o.passed && inside_hull > 0,
        format!("{inside_hull} reference samples inside the hull; {}", o.detail),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let basis = monomial_basis(2, 2);
    let quartic = monomial_basis(2, 4);
    let mut certified = 0;
    let mut failures = Vec::new();
    for case in 0..50 {
        let p = if case % 2 == 0 {
            // z' L L' z shifted by a random constant: SOS or close to it.
            let l = DMatrix::from_fn(basis.len(), basis.len(), |_, _| rng.gen_range(-1.0..1.0));
            let g = &l * l.transpose();
            let mut terms = Vec::new();
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    terms.push((basis[i].mul(&basis[j]), g[(i, j)]));
                }
            }
            terms.push((Monomial::one(2), rng.gen_range(-0.5..0.5)));
            Polynomial::from_terms(2, terms).unwrap()
        } else {
            Polynomial::from_terms(2, quartic.iter().map(|m| (m.clone(), rng.gen_range(-1.0..1.0)))).unwrap()
        };
        let cert = match check_sos(&p) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        if cert.is_some() {
            certified += 1;
            let min = (0..10_000)
                .map(|_| p.eval(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
                .fold(f64::INFINITY, f64::min);
            if min < -1e-6 {
                failures.push(format!("case {case} certified but reaches {min:.3e}"));
            }
        }
    }
    let motzkin = Polynomial::from_terms(
        2,
        [
            (Monomial::new(vec![4, 2]), 1.0),
            (Monomial::new(vec![2, 4]), 1.0),
            (Monomial::new(vec![2, 2]), -3.0),
            (Monomial::one(2), 1.0),
        ],
    )
    .unwrap();
    let motzkin_not_sos = matches!(check_sos(&motzkin), Ok(None));
    let motzkin_min = (0..10_000)
        .map(|_| motzkin.eval(&[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
        .fold(f64::INFINITY, f64::min);
    let passed = failures.is_empty() && certified > 0 && certified < 50 && motzkin_not_sos && motzkin_min >= 0.0;
    outcome(
        passed,
        format!(
            "{certified}/50 certified with no sampled negatives{}, Motzkin non-SOS {motzkin_not_sos} with sampled min {motzkin_min:.2e}",
            if failures.is_empty() { String::new() } else { format!(" except {}", failures.join("; ")) }
        ),
    )
}

fn criterion_7() -> Outcome {
    let opts = SolverOptions::default();
    // minimize t s.t. [[t, 1], [1, t]] PSD: optimum 1.
    let mut p = SdpProblem::new(1);
    p.objective[0] = 1.0;
    let mut b = LmiBlock::new(2);
    b.add_coeff(0, 0, 0, 1.0);
    b.add_coeff(0, 1, 1, 1.0);
    b.add_constant(1, 0, 1.0);
    p.blocks.push(b);
    let s1 = solve(&p, &opts).unwrap();
    // minimize x s.t. x - 3 >= 0: optimum 3.
    let mut q = SdpProblem::new(1);
    q.objective[0] = 1.0;
    q.blocks.push(LmiBlock::scalar(-3.0, &[(0, 1.0)]));
    let s2 = solve(&q, &opts).unwrap();
    let e1 = (s1.objective - 1.0).abs();
    let e2 = (s2.objective - 3.0).abs();

    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/fixtures");
    let dump = std::fs::read_to_string(format!("{dir}/gram_lower_bound.json")).unwrap();
    let ext: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{dir}/external_results.json")).unwrap()).unwrap();
    let expected = ext["results"]["gram_lower_bound"]["objective"].as_f64().unwrap();
    let s3 = solve(&SdpProblem::from_json(&dump).unwrap(), &opts).unwrap();
    let e3 = (s3.objective - expected).abs();
    let passed = s1.status == SolveStatus::Optimal
        && s2.status == SolveStatus::Optimal
        && s3.status == SolveStatus::Optimal
        && e1 <= 1e-6
        && e2 <= 1e-6
        && e3 <= 1e-6;
    outcome(
        passed,
        format!(
            "analytic errors {e1:.1e} and {e2:.1e}; Gram fixture {:.9} vs external {expected:.9}",
            s3.objective
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        let p = Polynomial::from_terms(
            n,
            monomial_basis(n, 4).into_iter().map(|m| (m, rng.gen_range(-1.0..1.0))),
        )
        .unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = p.gradient();
        for k in 0..n {
            let h = 1e-5;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
            let exact = g.components()[k].eval(&x);
            worst = worst.max((exact - fd).abs() / exact.abs().max(1.0));
        }
    }
    let rot = PolynomialVector::new(vec![Polynomial::var(2, 1).scale(-1.0), Polynomial::var(2, 0)]).unwrap();
    let steps = (2.0 * std::f64::consts::PI / 1e-3).round() as usize;
    let dt = 2.0 * std::f64::consts::PI / steps as f64;
    let mut x = vec![1.0, 0.0];
    for _ in 0..steps {
        x = rk4_step(&rot, &x, dt);
    }
    let drift = ((x[0] - 1.0).powi(2) + x[1].powi(2)).sqrt();
    outcome(
        worst <= 1e-6 && drift <= 1e-6,
        format!("worst gradient relative error {worst:.1e} over 100 cases, rotation drift {drift:.1e} per period at dt {dt:.6}"),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = decay_csv(dir.path());
    let ball = far_ball(dir.path());
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
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
        (code(&out), out_dir)
    };
    let (c1, d1) = run("first");
    let (c2, d2) = run("second");
    if c1 != 0 || c2 != 0 {
        return outcome(false, format!("learn exited with {c1} and {c2}"));
    }
    let replay_dir = dir.path().join("replay");
    let out = certds(&[
        "learn",
        "--manifest",
        path_str(&d1.join("manifest.json")),
        "--output-dir",
        path_str(&replay_dir),
    ]);
    if code(&out) != 0 {
        return outcome(false, format!("replay exited with {}", code(&out)));
    }
    let files = ["result.json", "sets.json", "summary.txt"];
    let same = files.iter().all(|f| {
        let a = std::fs::read(d1.join(f)).unwrap();
        a == std::fs::read(d2.join(f)).unwrap() && a == std::fs::read(replay_dir.join(f)).unwrap()
    });
    outcome(
        same,
        format!(
            "{} output files compared across two runs and a manifest replay",
            files.len()
        ),
    )
}

fn main() {
    let c4 = std::thread::spawn(criterion_4);
    let c5 = std::thread::spawn(criterion_5);
    let c9 = std::thread::spawn(criterion_9);
    let (o1, r1) = criterion_1();
    let (o2, r2) = criterion_2();
    let o6 = criterion_6();
    let o7 = criterion_7();
    let o8 = criterion_8();
    let (o4, r4) = c4.join().expect("criterion 4 thread");
    let o3 = criterion_3(&[
        ("warm start", r1.as_ref()),
        ("cubic generator", r2.as_ref()),
        ("ellipse barrier", r4.as_ref()),
    ]);
    let o5 = c5.join().expect("criterion 5 thread");
    let o9 = c9.join().expect("criterion 9 thread");

    let rows = [
        (1, "warm-start recovery", o1),
        (2, "generator self-consistency", o2),
        (3, "stability falsification", o3),
        (4, "ellipse barrier scenario", o4),
        (5, "U-shaped obstacle", o5),
        (6, "SOS compiler oracle", o6),
        (7, "SDP correctness", o7),
        (8, "numerical hygiene", o8),
        (9, "determinism", o9),
    ];
    let mut failed = 0;
    for (i, name, o) in &rows {
        println!(
            "criterion {i} ({name}): {} | {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
