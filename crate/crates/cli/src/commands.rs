//! Implementation of the subcommands, independent of argument parsing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use certds::dynsim::{falsify, grid, integrate, safe_rollout_check, DEFAULT_DT};
use certds::learner::{
    dedupe, learn as learn_barrier, learn_unconstrained, make_initial_set, mse, preprocess, verify_certificates,
    LearnResult,
};
use certds::semialg::{fit_unsafe_polynomial, BoundingBox};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::csvio::{parse_trajectories, write_trajectory};
use crate::error::CliError;
use crate::manifest::{sha256_hex, unix_now, FileRef, RunManifest};
use crate::schema::{
    BarrierStats, CertificateCheck, FitInfo, Metrics, ObstacleSpec, PolygonFile, RunConfig, SetsFile, TrajectoryMetric,
    VerifyReport,
};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CERTDS_OUTPUT_DIR";

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("certds-out"), PathBuf::from)
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path.display(), e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|_| CliError::schema(path.display(), "not valid UTF-8"))
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::schema(path.display(), e))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    parse_json(path, &read_text(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path.display(), e))
}

/// Writes to `output` when given, else to stdout.
pub fn emit(output: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match output {
        Some(p) => write_file(p, contents.as_bytes()),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct ConfigOverrides {
    pub deg_f: Option<usize>,
    pub deg_v: Option<usize>,
    pub deg_b: Option<usize>,
    pub max_rounds: Option<usize>,
    pub seed: Option<u64>,
    pub subsample: Option<usize>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let l = &mut cfg.learner;
        l.deg_f = self.deg_f.unwrap_or(l.deg_f);
        l.deg_v = self.deg_v.unwrap_or(l.deg_v);
        l.deg_b = self.deg_b.unwrap_or(l.deg_b);
        l.max_rounds = self.max_rounds.unwrap_or(l.max_rounds);
        l.seed = self.seed.unwrap_or(l.seed);
        if self.subsample.is_some() {
            cfg.subsample = self.subsample;
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearnArgs {
    pub data: PathBuf,
    pub obstacles: Vec<PathBuf>,
    pub config: Option<PathBuf>,
    pub overrides: ConfigOverrides,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct LearnOutput {
    pub result: LearnResult,
    pub manifest: RunManifest,
    pub summary: String,
}

pub const RESULT_FILE: &str = "result.json";
pub const SETS_FILE: &str = "sets.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn learn(args: &LearnArgs) -> Result<LearnOutput, CliError> {
    let started = unix_now();
    let mut cfg = match &args.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    args.overrides.apply(&mut cfg);
    let obstacles: Vec<String> = args.obstacles.iter().map(|p| p.display().to_string()).collect();
    run_learn(
        &args.data.display().to_string(),
        &obstacles,
        cfg,
        &args.output_dir,
        started,
    )
}

/// Re-runs the `learn` invocation recorded in a manifest, after checking that
/// the input files still hash to the recorded values.
pub fn replay(manifest: &Path, output_dir: &Path) -> Result<LearnOutput, CliError> {
    let started = unix_now();
    let m: RunManifest = load_json(manifest)?;
    for r in std::iter::once(&m.dataset).chain(&m.obstacles) {
        if sha256_hex(&read(Path::new(&r.path))?) != r.sha256 {
            return Err(CliError::schema(&r.path, "contents differ from the manifest"));
        }
    }
    let obstacles: Vec<String> = m.obstacles.iter().map(|r| r.path.clone()).collect();
    run_learn(&m.dataset.path, &obstacles, m.config, output_dir, started)
}

fn run_learn(
    data: &str,
    obstacle_paths: &[String],
    cfg: RunConfig,
    output_dir: &Path,
    started: u64,
) -> Result<LearnOutput, CliError> {
    cfg.learner.validate().map_err(|e| CliError::schema("config", e))?;
    if !(cfg.initial_padding >= 0.0) {
        return Err(CliError::schema("config", "initial_padding must be nonnegative"));
    }
    let data_path = Path::new(data);
    let data_bytes = read(data_path)?;
    let text = String::from_utf8(data_bytes.clone()).map_err(|_| CliError::schema(data, "not valid UTF-8"))?;
    let ds = parse_trajectories(&text, cfg.attractor.as_deref()).map_err(|e| CliError::schema(data, e))?;

    let mut obstacle_refs = Vec::new();
    let mut sets = Vec::new();
    for p in obstacle_paths {
        let path = Path::new(p);
        let bytes = read(path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::schema(p, "not valid UTF-8"))?;
        let spec: ObstacleSpec = parse_json(path, &text)?;
        let set = spec.to_set().map_err(|e| CliError::schema(p, e))?;
        if set.dim() != ds.dim() {
            return Err(CliError::schema(
                p,
                format!("obstacle has dimension {}, data has {}", set.dim(), ds.dim()),
            ));
        }
        sets.push(set);
        obstacle_refs.push(FileRef::new(p.clone(), &bytes));
    }

    let (nds, scaling) = preprocess(&ds, cfg.subsample).map_err(|e| CliError::schema(data, e))?;
    let unsafe_sets = sets
        .iter()
        .map(|s| scaling.normalize_set(s))
        .collect::<certds::Result<Vec<_>>>()?;
    let (mut result, initial) = if unsafe_sets.is_empty() {
        (learn_unconstrained(&nds, &cfg.learner)?, None)
    } else {
        let x0 = make_initial_set(&nds, cfg.initial_padding)?;
        (learn_barrier(&nds, &x0, &unsafe_sets, &cfg.learner)?, Some(x0))
    };
    result.scaling = scaling;

    let result_json = to_json(&result);
    let sets_json = to_json(&SetsFile { initial, unsafe_sets });
    let summary = summarize(&result);
    let mut outputs = Vec::new();
    for (name, contents) in [
        (RESULT_FILE, &result_json),
        (SETS_FILE, &sets_json),
        (SUMMARY_FILE, &summary),
    ] {
        let path = output_dir.join(name);
        write_file(&path, contents.as_bytes())?;
        outputs.push(FileRef::new(path.display().to_string(), contents.as_bytes()));
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "learn".into(),
        dataset: FileRef::new(data, &data_bytes),
        obstacles: obstacle_refs,
        seed: cfg.learner.seed,
        config: cfg,
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
    };
    write_file(&output_dir.join(MANIFEST_FILE), to_json(&manifest).as_bytes())?;
    Ok(LearnOutput {
        result,
        manifest,
        summary,
    })
}

/// Human-readable digest of a result.
pub fn summarize(r: &LearnResult) -> String {
    let c = &r.config;
    let mut s = String::new();
    let _ = writeln!(s, "mse (normalized): {:.6e}", r.mse);
    let _ = writeln!(s, "degrees: f {}, V {}, B {}", c.deg_f, c.deg_v, c.deg_b);
    let _ = writeln!(s, "barrier: {}", if r.b.is_some() { "yes" } else { "no" });
    let _ = writeln!(s, "rounds: {}", r.diagnostics.rounds);
    if let Some(slack) = r.diagnostics.barrier_slack {
        let _ = writeln!(s, "final barrier slack: {slack:.3e}");
    }
    let _ = writeln!(s, "certificates: {}", r.gram_certificates.len());
    for cert in &r.gram_certificates {
        let _ = writeln!(
            s,
            "  {}: min eigenvalue {:.3e}",
            cert.label,
            cert.certificate.min_eigenvalue()
        );
    }
    let _ = writeln!(s, "solves:");
    for p in &r.diagnostics.phases {
        let _ = writeln!(
            s,
            "  round {} {}: {:?}, objective {:.6e}, {} iterations",
            p.round, p.phase, p.status, p.objective, p.iterations
        );
    }
    for a in &r.diagnostics.degree_adjustments {
        let _ = writeln!(s, "degree adjustment: {a}");
    }
    for n in &r.diagnostics.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

fn load_result(path: &Path) -> Result<LearnResult, CliError> {
    let r: LearnResult = load_json(path)?;
    if r.f.len() != r.v.dim() || r.f.dim() != r.v.dim() || r.scaling.dim() != r.v.dim() {
        return Err(CliError::schema(path.display(), "inconsistent dimensions"));
    }
    Ok(r)
}

/// Metrics of a result on a dataset given in original coordinates.
pub fn eval(result: &Path, data: &Path) -> Result<Metrics, CliError> {
    let r = load_result(result)?;
    let ds = parse_trajectories(&read_text(data)?, None).map_err(|e| CliError::schema(data.display(), e))?;
    if ds.dim() != r.v.dim() {
        return Err(CliError::schema(
            data.display(),
            format!("data has dimension {}, result has {}", ds.dim(), r.v.dim()),
        ));
    }
    let (ds, removed) = dedupe(&ds)?;
    let nds = r.scaling.apply_dataset(&ds);
    let err = mse(&r.f, &nds)?;
    let trajectories = nds
        .demonstrations()
        .iter()
        .enumerate()
        .map(|(index, d)| {
            let (first, last) = (&d.samples[0], &d.samples[d.samples.len() - 1]);
            let endpoint_error = integrate(&r.f, &first.x, DEFAULT_DT, last.t - first.t).map_or(f64::NAN, |traj| {
                traj.last()
                    .iter()
                    .zip(&last.x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            });
            TrajectoryMetric { index, endpoint_error }
        })
        .collect();
    let barrier = r.b.as_ref().map(|b| {
        let vals: Vec<f64> = nds.samples().map(|s| b.eval(&s.x)).collect();
        BarrierStats {
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            positive: vals.iter().filter(|&&v| v > 0.0).count(),
        }
    });
    Ok(Metrics {
        mse: err,
        samples: nds.num_samples(),
        duplicates_removed: removed,
        trajectories,
        barrier,
    })
}

#[derive(Clone, Debug)]
pub struct VerifyArgs {
    pub result: PathBuf,
    pub sets: PathBuf,
    pub samples: usize,
    pub seed: u64,
    pub rollouts: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Half-width of the sampling box `[-r, r]^n` in normalized coordinates.
    pub domain_radius: f64,
}

/// Gram re-verification, falsification and rollouts. The returned report
/// says whether everything passed; errors are reserved for bad inputs.
pub fn verify(args: &VerifyArgs) -> Result<VerifyReport, CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    if !(args.dt > 0.0 && args.horizon > 0.0 && args.domain_radius > 0.0) {
        return Err(CliError::Usage("dt, horizon and domain radius must be positive".into()));
    }
    let r = load_result(&args.result)?;
    let sets: SetsFile = load_json(&args.sets)?;
    let n = r.v.dim();
    if sets.initial.iter().chain(&sets.unsafe_sets).any(|s| s.dim() != n) {
        return Err(CliError::schema(
            args.sets.display(),
            "set dimension differs from the result",
        ));
    }
    let certificates = match verify_certificates(&r, sets.initial.as_ref(), &sets.unsafe_sets) {
        Ok(()) => CertificateCheck {
            passed: true,
            error: None,
        },
        Err(e) => CertificateCheck {
            passed: false,
            error: Some(e.to_string()),
        },
    };
    let domain = BoundingBox::symmetric(n, args.domain_radius);
    let falsification = falsify(
        &r,
        sets.initial.as_ref(),
        &sets.unsafe_sets,
        &domain,
        args.samples,
        args.seed,
    )?;
    let rollouts = match (&r.b, &sets.initial) {
        (Some(_), Some(x0)) if args.rollouts > 0 => Some(safe_rollout_check(
            &r,
            x0,
            &sets.unsafe_sets,
            args.rollouts,
            args.dt,
            args.horizon,
            args.seed,
        )?),
        _ => None,
    };
    let rollouts_ok = rollouts
        .as_ref()
        .is_none_or(|rep| rep.passed && rep.barrier_crossings == 0);
    Ok(VerifyReport {
        passed: certificates.passed && falsification.passed() && rollouts_ok,
        certificates,
        falsification,
        rollouts,
    })
}

/// One-line reasons a report failed.
pub fn failure_summary(report: &VerifyReport) -> String {
    let mut parts = Vec::new();
    if let Some(e) = &report.certificates.error {
        parts.push(e.clone());
    }
    for c in report.falsification.conditions.iter().filter(|c| !c.passed) {
        parts.push(format!("{} worst margin {:.3e}", c.label, c.worst_margin));
    }
    if let Some(r) = &report.rollouts {
        if let Some(v) = &r.violation {
            parts.push(format!(
                "rollout {} entered unsafe set {} at t = {:.4} ({:?})",
                v.trajectory, v.unsafe_set, v.time, v.state
            ));
        }
        if r.barrier_crossings > 0 {
            parts.push(format!("{} rollout states crossed B = 0", r.barrier_crossings));
        }
    }
    parts.join("; ")
}

/// Grid rows `x1,x2,f1,f2,V,B` over `[lo1,hi1] x [lo2,hi2]` in the result's
/// normalized frame. `B` is empty when the result has no barrier.
pub fn export_field(result: &Path, bounds: [f64; 4], resolution: usize) -> Result<String, CliError> {
    if resolution < 2 {
        return Err(CliError::Usage("resolution must be at least 2".into()));
    }
    let r = load_result(result)?;
    if r.v.dim() != 2 {
        return Err(CliError::schema(result.display(), "field export needs a planar result"));
    }
    let domain = BoundingBox::new(vec![bounds[0], bounds[2]], vec![bounds[1], bounds[3]])
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = String::from("x1,x2,f1,f2,V,B\n");
    let mut fx = vec![0.0; 2];
    for x in grid(&domain, resolution) {
        r.f.eval_into(&x, &mut fx);
        let b = r.b.as_ref().map_or(String::new(), |b| b.eval(&x).to_string());
        let _ = writeln!(out, "{},{},{},{},{},{}", x[0], x[1], fx[0], fx[1], r.v.eval(&x), b);
    }
    Ok(out)
}

/// Rollout of the learned field from `start` (normalized frame) as CSV.
pub fn simulate(result: &Path, start: &[f64], dt: f64, horizon: f64) -> Result<String, CliError> {
    let r = load_result(result)?;
    if start.len() != r.v.dim() {
        return Err(CliError::Usage(format!("start must have {} coordinates", r.v.dim())));
    }
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(CliError::Usage("dt and horizon must be positive".into()));
    }
    Ok(write_trajectory(&integrate(&r.f, start, dt, horizon)?))
}

/// Polynomial over-approximations of every polygon in the file.
pub fn fit_obstacle(polygon: &Path, margin: f64, degree: usize, grid: usize) -> Result<Vec<ObstacleSpec>, CliError> {
    if !(margin >= 0.0) {
        return Err(CliError::Usage("margin must be nonnegative".into()));
    }
    let file: PolygonFile = load_json(polygon)?;
    let polys = file.polygons().map_err(|e| CliError::schema(polygon.display(), e))?;
    polys
        .iter()
        .map(|p| {
            let fit = fit_unsafe_polynomial(p, margin, degree, grid)?;
            Ok(ObstacleSpec::Semialgebraic {
                set: fit.set,
                fit: Some(FitInfo {
                    margin,
                    degree,
                    offset: fit.offset,
                    worst_margin: fit.worst_margin,
                }),
            })
        })
        .collect()
}
