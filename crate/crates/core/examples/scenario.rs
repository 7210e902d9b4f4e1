//! Runs the barrier learner on a synthetic S-shaped scenario and reports
//! certificate checks, falsification and rollouts.

use std::time::Instant;

use certds::dynsim::{falsify, safe_rollout_check};
use certds::learner::{learn, make_initial_set, LearnConfig};
use certds::semialg::{ellipse_set, fit_unsafe_polynomial, BoundingBox, Polygon2D};
use certds::synth::s_shape;

fn main() {
    env_logger::init();
    let mode = std::env::args().nth(1).unwrap_or_default();
    let deg_b: usize = std::env::args().nth(2).map_or(4, |d| d.parse().expect("degree"));
    let ds = s_shape(&[0.45, 0.5, 0.55], 100).unwrap();
    let x0 = make_initial_set(&ds, 0.02).unwrap();
    let xu = if mode == "u" {
        let poly = Polygon2D::new(vec![
            [-1.05, -0.95],
            [-0.45, -0.95],
            [-0.45, -0.47],
            [-0.53, -0.47],
            [-0.53, -0.85],
            [-0.97, -0.85],
            [-0.97, -0.47],
            [-1.05, -0.47],
        ])
        .unwrap();
        let fit = fit_unsafe_polynomial(&poly, 0.01, 4, 60).unwrap();
        println!("U fit offset {:.3e}", fit.offset);
        vec![fit.set]
    } else {
        vec![ellipse_set([-0.3, -0.25], [0.12, 0.08], 0.0).unwrap()]
    };
    for (i, s) in ds.samples().enumerate() {
        if xu[0].contains(&s.x).unwrap() {
            println!("sample {i} at {:?} lies in the unsafe set", s.x);
        }
    }
    let cfg = LearnConfig {
        deg_f: 5,
        deg_v: 2,
        deg_b,
        ..LearnConfig::default()
    };
    let start = Instant::now();
    match learn(&ds, &x0, &xu, &cfg) {
        Ok(r) => {
            println!(
                "learned in {:.1?}: mse {:.3e}, rounds {}",
                start.elapsed(),
                r.mse,
                r.diagnostics.rounds
            );
            println!("notes {:?}", r.diagnostics.notes);
            let b = r.b.as_ref().unwrap();
            let max_b = ds.samples().map(|s| b.eval(&s.x)).fold(f64::NEG_INFINITY, f64::max);
            println!("max B on reference {max_b:.3e}");
            let rep = falsify(&r, Some(&x0), &xu, &BoundingBox::symmetric(2, 1.0), 10_000, 1).unwrap();
            for c in &rep.conditions {
                println!("  {} passed {} worst {:.3e}", c.label, c.passed, c.worst_margin);
            }
            let roll = safe_rollout_check(&r, &x0, &xu, 100, 1e-3, 20.0, 2).unwrap();
            println!(
                "rollouts passed {} crossings {} max B {:.3e}",
                roll.passed, roll.barrier_crossings, roll.max_barrier
            );
        }
        Err(e) => {
            println!("failed after {:.1?}: {e}", start.elapsed());
            if let Some(r) = e.last_feasible() {
                println!("notes {:?}", r.diagnostics.notes);
                for p in r.diagnostics.phases.iter().rev().take(4) {
                    println!("  {} {} {:?} {:.3e}", p.round, p.phase, p.status, p.objective);
                }
            }
        }
    }
}
