//! Synthetic demonstration datasets with known structure.

use crate::error::Result;
use crate::learner::{Demonstration, Sample, TrajectoryDataset};
use crate::poly::{Polynomial, PolynomialVector};

/// Samples the path `p(u)` traversed with `u(t) = exp(-t)`, so the motion
/// decays into `p(0) = 0`. `samples` points are spaced uniformly in time over
/// `[0, ln(1 / u_end)]`.
pub fn path_demonstration<P, D>(path: P, deriv: D, samples: usize, u_end: f64) -> Demonstration
where
    P: Fn(f64) -> Vec<f64>,
    D: Fn(f64) -> Vec<f64>,
{
    let t_end = (1.0 / u_end).ln();
    let samples = (0..samples)
        .map(|i| {
            let t = t_end * i as f64 / (samples - 1).max(1) as f64;
            let u = (-t).exp();
            Sample {
                t,
                x: path(u),
                v: deriv(u).iter().map(|d| -u * d).collect(),
            }
        })
        .collect();
    Demonstration { samples }
}

/// S-shaped planar demonstrations: `p(u) = (-u, a sin(2 pi u))` for the given
/// amplitudes, starting at `(-1, 0)`.
pub fn s_shape(amplitudes: &[f64], samples: usize) -> Result<TrajectoryDataset> {
    use std::f64::consts::PI;
    let demos = amplitudes
        .iter()
        .map(|&a| {
            path_demonstration(
                move |u| vec![-u, a * (2.0 * PI * u).sin()],
                move |u| vec![-1.0, 2.0 * PI * a * (2.0 * PI * u).cos()],
                samples,
                1e-3,
            )
        })
        .collect();
    TrajectoryDataset::new(2, demos, vec![0.0, 0.0])
}

/// Globally stable cubic field `(-x1 + x2 - x1^3, -x1 - x2 - x2^3)` with
/// Lyapunov function `|x|^2`.
pub fn stable_cubic() -> PolynomialVector {
    let x = Polynomial::var(2, 0);
    let y = Polynomial::var(2, 1);
    let f1 = &(&y - &x) - &x.pow(3);
    let f2 = &(&x.scale(-1.0) - &y) - &y.pow(3);
    PolynomialVector::new(vec![f1, f2]).expect("two components of dimension 2")
}

/// Demonstrations of `f` by RK4 from each start, with exact velocities.
pub fn rollout_dataset(f: &PolynomialVector, starts: &[Vec<f64>], dt: f64, steps: usize) -> Result<TrajectoryDataset> {
    let mut demos = Vec::with_capacity(starts.len());
    for s in starts {
        let mut x = s.clone();
        let mut samples = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            samples.push(Sample {
                t: k as f64 * dt,
                x: x.clone(),
                v: f.evaluate(&x)?,
            });
            x = crate::dynsim::rk4_step(f, &x, dt);
        }
        demos.push(Demonstration { samples });
    }
    TrajectoryDataset::new(f.dim(), demos, vec![0.0; f.dim()])
}
