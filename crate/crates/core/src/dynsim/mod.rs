//! Simulation of learned systems and sampling-based falsification of their
//! certificates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::LearnResult;
use crate::poly::{Polynomial, PolynomialVector};
use crate::semialg::{BasicSemialgebraicSet, BoundingBox};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_ATTRACTOR_RADIUS: f64 = 1e-3;
/// Allowed overshoot of `B` past zero along a rollout.
pub const CROSSING_BUDGET: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedAttractor,
    Horizon,
    LeftDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectories hold at least the initial state")
    }
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    pub attractor_radius: f64,
    pub domain: Option<BoundingBox>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            attractor_radius: DEFAULT_ATTRACTOR_RADIUS,
            domain: None,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// One classic fourth-order Runge-Kutta step.
pub fn rk4_step(f: &PolynomialVector, x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    let shifted = |k: &[f64], h: f64| -> Vec<f64> { (0..n).map(|i| x[i] + h * k[i]).collect() };
    let eval = |y: &[f64]| f.iter().map(|p| p.eval(y)).collect::<Vec<f64>>();
    let k1 = eval(x);
    let k2 = eval(&shifted(&k1, dt / 2.0));
    let k3 = eval(&shifted(&k2, dt / 2.0));
    let k4 = eval(&shifted(&k3, dt));
    (0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

pub fn integrate(f: &PolynomialVector, x0: &[f64], dt: f64, horizon: f64) -> Result<Trajectory> {
    integrate_with(f, x0, dt, horizon, &IntegrateOptions::default())
}

/// Fixed-step RK4 rollout from `x0` until the horizon, the attractor ball, or
/// the domain boundary is reached.
pub fn integrate_with(
    f: &PolynomialVector,
    x0: &[f64],
    dt: f64,
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if x0.len() != f.dim() || f.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: x0.len(),
        });
    }
    if !(dt > 0.0 && horizon > 0.0 && dt <= horizon) {
        return Err(Error::InvalidInput("need 0 < dt <= horizon".into()));
    }
    let steps = (horizon / dt).round() as usize;
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut termination = Termination::Horizon;
    let mut x = x0.to_vec();
    for k in 1..=steps {
        if norm(&x) <= opts.attractor_radius {
            termination = Termination::ReachedAttractor;
            break;
        }
        if opts.domain.as_ref().is_some_and(|d| !d.contains(&x)) {
            termination = Termination::LeftDomain;
            break;
        }
        let next = rk4_step(f, &x, dt);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite state at t = {}; last valid state {x:?}",
                k as f64 * dt
            )));
        }
        x = next;
        times.push(k as f64 * dt);
        states.push(x.clone());
    }
    if termination == Termination::Horizon && norm(&x) <= opts.attractor_radius {
        termination = Termination::ReachedAttractor;
    }
    Ok(Trajectory {
        times,
        states,
        dt,
        termination,
    })
}

/// Membership in the certified safe set `{B <= 0}`.
pub fn is_certified_safe(b: &Polynomial, x: &[f64]) -> Result<bool> {
    Ok(b.evaluate(x)? <= 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub label: String,
    pub samples: usize,
    /// Smallest value of the condition's margin (nonnegative means satisfied).
    #[serde(deserialize_with = "crate::nonfinite::deserialize")]
    pub worst_margin: f64,
    pub counterexamples: Vec<Vec<f64>>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub seed: u64,
    pub samples: usize,
    pub conditions: Vec<ConditionVerdict>,
}

impl FalsificationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, label: &str) -> Option<&ConditionVerdict> {
        self.conditions.iter().find(|c| c.label == label)
    }
}

#[derive(Clone, Debug)]
pub struct FalsifyOptions {
    /// Lyapunov conditions are not checked inside this ball around the origin.
    pub exclusion_radius: f64,
    /// Margins down to `-tolerance` count as satisfied.
    pub tolerance: f64,
    pub max_counterexamples: usize,
    /// Draws allowed per requested set member before sampling is declared failed.
    pub max_tries_per_sample: usize,
    pub threads: usize,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        Self {
            exclusion_radius: 1e-3,
            tolerance: 1e-9,
            max_counterexamples: 10,
            max_tries_per_sample: 10_000,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()).min(8),
        }
    }
}

/// Samples are drawn in batches with one ChaCha stream per (condition,
/// batch), so a larger `n` only appends batches and never changes earlier
/// samples.
const BATCH: usize = 1024;

type Sampler<'a> = dyn Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + Sync + 'a;
type Margin<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

struct Batch {
    samples: usize,
    worst: f64,
    bad: Vec<Vec<f64>>,
    bad_count: usize,
    failed: bool,
}

fn run_batch(seed: u64, stream: u64, count: usize, sample: &Sampler, margin: &Margin, tol: f64, keep: usize) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Batch {
        samples: 0,
        worst: f64::INFINITY,
        bad: Vec::new(),
        bad_count: 0,
        failed: false,
    };
    for _ in 0..count {
        let Some(x) = sample(&mut rng) else {
            out.failed = true;
            break;
        };
        let m = margin(&x);
        out.samples += 1;
        out.worst = out.worst.min(m);
        if !(m >= -tol) {
            out.bad_count += 1;
            if out.bad.len() < keep {
                out.bad.push(x);
            }
        }
    }
    out
}

fn check_condition(
    label: String,
    index: u64,
    n: usize,
    seed: u64,
    sample: &Sampler,
    margin: &Margin,
    opts: &FalsifyOptions,
) -> ConditionVerdict {
    let batches: Vec<usize> = (0..n.div_ceil(BATCH)).map(|b| BATCH.min(n - b * BATCH)).collect();
    let threads = opts.threads.max(1);
    let mut results: Vec<Option<Batch>> = (0..batches.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (t, chunk) in results.chunks_mut(batches.len().div_ceil(threads).max(1)).enumerate() {
            let first = t * batches.len().div_ceil(threads).max(1);
            let batches = &batches;
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let b = first + i;
                    let stream = (index << 32) | b as u64;
                    *slot = Some(run_batch(
                        seed,
                        stream,
                        batches[b],
                        sample,
                        margin,
                        opts.tolerance,
                        opts.max_counterexamples,
                    ));
                }
            });
        }
    });
    let mut v = ConditionVerdict {
        label,
        samples: 0,
        worst_margin: f64::INFINITY,
        counterexamples: Vec::new(),
        passed: true,
        sampling_failure: None,
    };
    let mut bad_count = 0;
    for r in results.into_iter().flatten() {
        v.samples += r.samples;
        v.worst_margin = v.worst_margin.min(r.worst);
        bad_count += r.bad_count;
        for x in r.bad {
            if v.counterexamples.len() < opts.max_counterexamples {
                v.counterexamples.push(x);
            }
        }
        if r.failed && v.sampling_failure.is_none() {
            v.sampling_failure = Some(format!("could not draw {n} samples for `{}`", v.label));
        }
    }
    v.passed = bad_count == 0 && v.sampling_failure.is_none();
    v
}

fn member_sampler<'a>(
    set: &'a BasicSemialgebraicSet,
    domain: &'a BoundingBox,
    tries: usize,
) -> impl Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + Sync + 'a {
    move |rng: &mut ChaCha8Rng| {
        let region = set.bounds().unwrap_or(domain);
        (0..tries).find_map(|_| {
            let x = region.sample(rng);
            set.contains(&x).ok()?.then_some(x)
        })
    }
}

/// Moves `x` onto `{|B| <= width}` by Newton steps along `grad B`.
fn project_to_band(b: &Polynomial, grad: &PolynomialVector, x: &mut [f64], width: f64) -> bool {
    for _ in 0..50 {
        let v = b.eval(x);
        if v.abs() <= width {
            return true;
        }
        let g: Vec<f64> = grad.iter().map(|p| p.eval(x)).collect();
        let g2: f64 = g.iter().map(|a| a * a).sum();
        if g2 < 1e-24 {
            return false;
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= v * gi / g2;
        }
    }
    b.eval(x).abs() <= width
}

fn band_sampler<'a>(
    b: &'a Polynomial,
    grad: &'a PolynomialVector,
    domain: &'a BoundingBox,
    width: f64,
    tries: usize,
) -> impl Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + Sync + 'a {
    // Acceptance below 0.1% switches to projection.
    let probe = 1000.min(tries);
    move |rng: &mut ChaCha8Rng| {
        for _ in 0..probe {
            let x = domain.sample(rng);
            if b.eval(&x).abs() <= width {
                return Some(x);
            }
        }
        for _ in 0..tries {
            let mut x = domain.sample(rng);
            if project_to_band(b, grad, &mut x, width) && domain.contains(&x) {
                return Some(x);
            }
        }
        None
    }
}

/// Seeded sampling search for counterexamples to every certificate condition
/// of `result`, in the coordinates `result` was learned in.
pub fn falsify(
    result: &LearnResult,
    x0: Option<&BasicSemialgebraicSet>,
    xu: &[BasicSemialgebraicSet],
    domain: &BoundingBox,
    n: usize,
    seed: u64,
) -> Result<FalsificationReport> {
    falsify_with(result, x0, xu, domain, n, seed, &FalsifyOptions::default())
}

pub fn falsify_with(
    result: &LearnResult,
    x0: Option<&BasicSemialgebraicSet>,
    xu: &[BasicSemialgebraicSet],
    domain: &BoundingBox,
    n: usize,
    seed: u64,
    opts: &FalsifyOptions,
) -> Result<FalsificationReport> {
    let dim = result.v.dim();
    if n == 0 {
        return Err(Error::InvalidInput("falsification needs at least one sample".into()));
    }
    if domain.dim() != dim || x0.is_some_and(|s| s.dim() != dim) || xu.iter().any(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: domain.dim(),
        });
    }
    let eps = &result.config;
    let f = &result.f;
    let v = &result.v;
    let grad_v = v.gradient();
    let lie_v = grad_v.dot(f)?;
    let n2 = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>();
    let tries = opts.max_tries_per_sample;
    let excl = opts.exclusion_radius;
    let outside_ball = move |rng: &mut ChaCha8Rng| {
        (0..tries).find_map(|_| {
            let x = domain.sample(rng);
            (norm(&x) > excl).then_some(x)
        })
    };
    let mut conditions = Vec::new();
    let mut index = 0u64;
    let mut run = |label: String, sample: &Sampler, margin: &Margin| {
        conditions.push(check_condition(label, index, n, seed, sample, margin, opts));
        index += 1;
    };

    if let Some(b) = &result.b {
        if let Some(x0) = x0 {
            run(
                "barrier_initial".into(),
                &member_sampler(x0, domain, tries),
                &|x: &[f64]| -b.eval(x),
            );
        }
        for (j, set) in xu.iter().enumerate() {
            // B must be strictly positive; the tolerance shifts the margin.
            let tol = opts.tolerance;
            run(
                format!("barrier_unsafe_{j}"),
                &member_sampler(set, domain, tries),
                &move |x: &[f64]| b.eval(x) - 2.0 * tol,
            );
        }
        let grad_b = b.gradient();
        let width = eps.eps1.sqrt();
        let lie_b = grad_b.dot(f)?;
        run(
            "barrier_flow".into(),
            &band_sampler(b, &grad_b, domain, width, tries),
            &|x: &[f64]| -lie_b.eval(x),
        );
    }
    run("lyapunov_positive".into(), &outside_ball, &|x: &[f64]| {
        v.eval(x) - eps.eps3 * n2(x)
    });
    run("lyapunov_decrease".into(), &outside_ball, &|x: &[f64]| {
        -lie_v.eval(x) - eps.eps3 * n2(x)
    });
    Ok(FalsificationReport {
        seed,
        samples: n,
        conditions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutViolation {
    pub trajectory: usize,
    pub time: f64,
    pub state: Vec<f64>,
    pub unsafe_set: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub trajectories: usize,
    pub passed: bool,
    pub violation: Option<RolloutViolation>,
    /// States with `B` above the crossing budget.
    pub barrier_crossings: usize,
    #[serde(deserialize_with = "crate::nonfinite::deserialize")]
    pub max_barrier: f64,
    /// Largest per-step increase of `V` along any rollout.
    #[serde(deserialize_with = "crate::nonfinite::deserialize")]
    pub max_lyapunov_increase: f64,
}

/// Integrates `n_trajs` rollouts from seeded initial-set samples and checks
/// that none enters an unsafe set.
pub fn safe_rollout_check(
    result: &LearnResult,
    x0: &BasicSemialgebraicSet,
    xu: &[BasicSemialgebraicSet],
    n_trajs: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<RolloutReport> {
    let b = result
        .b
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("rollout check needs a barrier".into()))?;
    let mut report = RolloutReport {
        trajectories: n_trajs,
        passed: true,
        violation: None,
        barrier_crossings: 0,
        max_barrier: f64::NEG_INFINITY,
        max_lyapunov_increase: f64::NEG_INFINITY,
    };
    if n_trajs == 0 {
        log::warn!("rollout check with zero trajectories passes vacuously");
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fallback = BoundingBox::symmetric(x0.dim(), 2.0);
    let starts = x0.sample_members(&mut rng, &fallback, n_trajs, 10_000 * n_trajs.max(1))?;
    for (i, s) in starts.iter().enumerate() {
        let traj = integrate(&result.f, s, dt, horizon)?;
        let mut prev_v = result.v.eval(s);
        for (t, x) in traj.times.iter().zip(&traj.states) {
            let bx = b.eval(x);
            report.max_barrier = report.max_barrier.max(bx);
            if bx > CROSSING_BUDGET {
                report.barrier_crossings += 1;
            }
            let vx = result.v.eval(x);
            report.max_lyapunov_increase = report.max_lyapunov_increase.max(vx - prev_v);
            prev_v = vx;
            if report.violation.is_none() {
                for (j, set) in xu.iter().enumerate() {
                    if set.contains(x)? {
                        report.passed = false;
                        report.violation = Some(RolloutViolation {
                            trajectory: i,
                            time: *t,
                            state: x.clone(),
                            unsafe_set: j,
                        });
                        break;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Uniform `per_axis^n` grid over `domain` (endpoints included).
pub fn grid(domain: &BoundingBox, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let k = per_axis.max(2);
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|a| {
                    let i = idx % k;
                    idx /= k;
                    domain.lo[a] + (domain.hi[a] - domain.lo[a]) * i as f64 / (k - 1) as f64
                })
                .collect()
        })
        .collect()
}
