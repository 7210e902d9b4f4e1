#![allow(dead_code)]

use certds::learner::{Demonstration, Sample, TrajectoryDataset};

/// Fixed-step RK4 rollout of `rhs`, recording the exact velocity.
pub fn rollout(rhs: &dyn Fn(&[f64]) -> Vec<f64>, x0: &[f64], dt: f64, steps: usize) -> Demonstration {
    let mut x = x0.to_vec();
    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        samples.push(Sample {
            t: i as f64 * dt,
            x: x.clone(),
            v: rhs(&x),
        });
        let k1 = rhs(&x);
        let at = |k: &[f64], h: f64| x.iter().zip(k).map(|(a, b)| a + h * b).collect::<Vec<_>>();
        let k2 = rhs(&at(&k1, dt / 2.0));
        let k3 = rhs(&at(&k2, dt / 2.0));
        let k4 = rhs(&at(&k3, dt));
        for j in 0..x.len() {
            x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Demonstration { samples }
}

pub fn dataset(rhs: &dyn Fn(&[f64]) -> Vec<f64>, starts: &[Vec<f64>], dt: f64, steps: usize) -> TrajectoryDataset {
    let n = starts[0].len();
    let demos = starts.iter().map(|s| rollout(rhs, s, dt, steps)).collect();
    TrajectoryDataset::new(n, demos, vec![0.0; n]).unwrap()
}

pub fn linear(a: [[f64; 2]; 2]) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x: &[f64]| vec![a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}
