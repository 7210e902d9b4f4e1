//! The alternating SOS program.
//!
//! Stability constraints (`V - e3|x|^2` and `-grad V . f - e3|x|^2` SOS) and
//! barrier constraints (initial set, each unsafe set, flow condition) are
//! written once as symbolic expressions over the blocks `f`, `V`, `B`, `phi`,
//! `tau*`, `sigma*`. Each phase fixes some blocks, checks with
//! [`bilinear_structure`] that the rest enter affinely, and solves the
//! resulting SDP.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::{mse, ScalingRecord, TrajectoryDataset};
use super::{DegreeSuggestion, Diagnostics, LearnConfig, LearnError, LearnResult, NamedCertificate, PhaseRecord};
use crate::error::Error;
use crate::poly::{monomial_basis, monomial_range, Polynomial, PolynomialVector};
use crate::sdp::{self, LeastSquares, SdpSolution, SolveStatus, SolverOptions};
use crate::semialg::{BasicSemialgebraicSet, BoundingBox};
use crate::sos::{
    bilinear_structure, gram_basis, AffineForm, AffinePoly, Binding, CoefficientSpace, GramCertificate, SymExpr,
    CERT_COEF_TOL, CERT_EIG_TOL,
};

pub const LYAP_POS: &str = "lyapunov_positive";
pub const LYAP_DEC: &str = "lyapunov_decrease";
pub const BAR_INIT: &str = "barrier_initial";
pub const BAR_FLOW: &str = "barrier_flow";

fn bar_unsafe(j: usize) -> String {
    format!("barrier_unsafe_{j}")
}

/// Optimization phases use `eps * (1 + EPS_MARGIN)` so the final
/// certificates at the configured `eps` are strictly feasible.
const EPS_MARGIN: f64 = 0.5;
/// Reference samples are kept at `B <= -REF_MARGIN`.
const REF_MARGIN: f64 = 1e-6;
/// Decrease rate beyond which a sample no longer pulls on `V`.
const HINGE_CAP: f64 = 0.2;
/// Backward integration used to trace the region `{B > 0}` must contain.
const SHADOW_DT: f64 = 0.02;
const SHADOW_STEPS: usize = 500;
/// Lower bound on the top form of `B` relative to `|x|^deg_b`.
const TOP_MARGIN: f64 = 1e-3;
/// Ridge weight of the barrier initialization.
const RIDGE: f64 = 1e-4;
/// Coefficient bound for `phi`; a larger `phi` always eases the flow
/// condition, so without it the optimum is approached only as `phi` grows
/// without bound.
const PHI_BOX: f64 = 1e2;
/// Slack level treated as zero in the barrier loop, at the solver's own
/// accuracy. Candidates below it still have to pass exact certification.
const SLACK_TOL: f64 = 1e-6;
/// Barrier rounds run with the fitted dynamics held fixed before `f` may
/// move; they stop early once a round shrinks the slack by less than
/// `FIXED_F_PROGRESS`.
const FIXED_F_ROUNDS: usize = 30;
const FIXED_F_PROGRESS: f64 = 0.25;
/// With `f` fixed the slack only approaches zero, so certification is
/// attempted once it drops below this level and again after each halving.
const CERTIFY_SLACK: f64 = 1e-4;
/// Certification attempts on the best candidates before giving up.
const MAX_CERTIFY_ATTEMPTS: usize = 3;
const MAX_PENALTY: f64 = 1e6;
/// Lower bound on the barrier slack.
const SLACK_FLOOR: f64 = 1e-2;

#[derive(Clone, Copy)]
struct Eps {
    e1: f64,
    e2: f64,
    e3: f64,
}

impl Eps {
    fn of(cfg: &LearnConfig, factor: f64) -> Self {
        Eps {
            e1: cfg.eps1 * factor,
            e2: cfg.eps2 * factor,
            e3: cfg.eps3 * factor,
        }
    }
}

#[derive(Clone, Debug)]
pub(super) struct State {
    pub f: Vec<Polynomial>,
    pub v: Polynomial,
    pub b: Option<Polynomial>,
    pub phi: Option<Polynomial>,
    pub tau: Vec<Polynomial>,
    pub sigma: Vec<Vec<Polynomial>>,
}

pub(super) struct Ctx<'a> {
    pub n: usize,
    pub cfg: &'a LearnConfig,
    pub opts: SolverOptions,
    pub ds: &'a TrajectoryDataset,
    pub xs: Vec<Vec<f64>>,
    pub vs: Vec<Vec<f64>>,
    pub x0: Option<&'a BasicSemialgebraicSet>,
    pub xu: &'a [BasicSemialgebraicSet],
    pub diag: Diagnostics,
    tau_deg: Vec<usize>,
    sigma_deg: Vec<Vec<usize>>,
    phi_deg: usize,
    /// Coefficient bound for `B`; the flow condition rewards scaling `B`
    /// up, so the barrier phase needs a normalization.
    b_box: f64,
}

fn norm2(n: usize) -> Polynomial {
    Polynomial::norm_squared(n)
}

fn even_ceil(d: usize) -> usize {
    d + d % 2
}

fn tau_name(i: usize) -> String {
    format!("tau{i}")
}

fn sigma_name(j: usize, i: usize) -> String {
    format!("sigma{j}_{i}")
}

impl<'a> Ctx<'a> {
    pub fn new(
        ds: &'a TrajectoryDataset,
        cfg: &'a LearnConfig,
        x0: Option<&'a BasicSemialgebraicSet>,
        xu: &'a [BasicSemialgebraicSet],
    ) -> Result<Self, LearnError> {
        cfg.validate()?;
        let n = ds.dim();
        for s in x0.into_iter().chain(xu) {
            if s.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.dim(),
                }
                .into());
            }
        }
        let xs: Vec<Vec<f64>> = ds.samples().map(|s| s.x.clone()).collect();
        let vs: Vec<Vec<f64>> = ds.samples().map(|s| s.v.clone()).collect();
        let mut ctx = Ctx {
            n,
            cfg,
            opts: SolverOptions {
                tol: cfg.solver_tol,
                max_iter: cfg.solver_max_iter,
            },
            ds,
            xs,
            vs,
            x0,
            xu,
            diag: Diagnostics::default(),
            tau_deg: Vec::new(),
            sigma_deg: Vec::new(),
            phi_deg: cfg.deg_phi,
            b_box: 1.0,
        };
        ctx.pick_multiplier_degrees();
        Ok(ctx)
    }

    fn multiplier_degree(&mut self, label: &str, fixed: Option<usize>, g_deg: usize) -> usize {
        let db = self.cfg.deg_b;
        let mut d = fixed.unwrap_or_else(|| even_ceil(db.saturating_sub(g_deg)));
        if (d + g_deg).max(db) % 2 == 1 && d + g_deg < db {
            // Raise until the multiplier term dominates and the degree is even.
            let old = d;
            d = even_ceil(db - g_deg);
            self.diag.degree_adjustments.push(format!(
                "{label}: multiplier degree raised from {old} to {d} for even constraint degree"
            ));
        }
        d
    }

    fn pick_multiplier_degrees(&mut self) {
        if let Some(x0) = self.x0 {
            let degs: Vec<usize> = x0.inequalities().iter().map(Polynomial::degree).collect();
            self.tau_deg = degs
                .iter()
                .enumerate()
                .map(|(i, &g)| self.multiplier_degree(&tau_name(i), self.cfg.deg_tau, g))
                .collect();
        }
        let xu = self.xu;
        self.sigma_deg = xu
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.inequalities()
                    .iter()
                    .enumerate()
                    .map(|(i, g)| self.multiplier_degree(&sigma_name(j, i), self.cfg.deg_sigma, g.degree()))
                    .collect()
            })
            .collect();
        if !xu.is_empty() {
            let lie = self.cfg.deg_b - 1 + self.cfg.deg_f;
            let mut d = self.cfg.deg_phi;
            if lie % 2 == 1 && lie > d + 2 * self.cfg.deg_b {
                while d + 2 * self.cfg.deg_b < lie {
                    d += 2;
                }
                self.diag.degree_adjustments.push(format!(
                    "phi: degree raised from {} to {d} for even flow-constraint degree",
                    self.cfg.deg_phi
                ));
            }
            self.phi_deg = d;
        }
    }

    fn f_support(&self) -> Vec<Vec<crate::poly::Monomial>> {
        vec![monomial_range(self.n, 1, self.cfg.deg_f); self.n]
    }

    fn suggestion(&self) -> DegreeSuggestion {
        DegreeSuggestion {
            deg_f: self.cfg.deg_f + 1,
            deg_v: self.cfg.deg_v,
            deg_b: self.cfg.deg_b + 2,
        }
    }

    fn record(&mut self, round: usize, phase: &str, sol: &SdpSolution) {
        self.diag.phases.push(PhaseRecord {
            round,
            phase: phase.to_string(),
            status: sol.status,
            objective: sol.objective,
            iterations: sol.iterations,
        });
        log::debug!(
            "round {round} {phase}: {:?} obj {:.6e} ({} iterations)",
            sol.status,
            sol.objective,
            sol.iterations
        );
    }

    fn fit_objective(&self, f: &[Polynomial]) -> f64 {
        self.xs
            .iter()
            .zip(&self.vs)
            .map(|(x, v)| f.iter().zip(v).map(|(p, vk)| (p.eval(x) - vk).powi(2)).sum::<f64>())
            .sum()
    }

    fn result(&self, st: &State, certs: Vec<NamedCertificate>) -> Result<LearnResult, LearnError> {
        let f = PolynomialVector::new(st.f.clone())?;
        let mse = mse(&f, self.ds)?;
        Ok(LearnResult {
            f,
            v: st.v.clone(),
            b: st.b.clone(),
            tau: st.tau.clone(),
            sigma: st.sigma.clone(),
            phi: st.phi.clone(),
            gram_certificates: certs,
            mse,
            scaling: ScalingRecord::identity(self.n),
            config: self.cfg.clone(),
            diagnostics: self.diag.clone(),
        })
    }
}

// ---- symbolic constraint expressions ----

fn expr_v_pos(n: usize, e: Eps) -> SymExpr {
    SymExpr::block(n, "V", 0).sub(&SymExpr::poly(&norm2(n).scale(e.e3)))
}

fn expr_v_dec(n: usize, e: Eps) -> SymExpr {
    SymExpr::lie_derivative(n, "V", "f")
        .scale(-1.0)
        .sub(&SymExpr::poly(&norm2(n).scale(e.e3)))
}

fn expr_init(n: usize, x0: &BasicSemialgebraicSet) -> SymExpr {
    let mut e = SymExpr::block(n, "B", 0).scale(-1.0);
    for (i, g) in x0.inequalities().iter().enumerate() {
        e = e.sub(&SymExpr::block(n, &tau_name(i), 0).mul_poly(g));
    }
    e
}

fn expr_unsafe(n: usize, j: usize, set: &BasicSemialgebraicSet, e: Eps) -> SymExpr {
    let mut ex = SymExpr::block(n, "B", 0).sub(&SymExpr::poly(&Polynomial::constant(n, e.e2)));
    for (i, g) in set.inequalities().iter().enumerate() {
        ex = ex.sub(&SymExpr::block(n, &sigma_name(j, i), 0).mul_poly(g));
    }
    ex
}

fn expr_flow(n: usize, e: Eps) -> SymExpr {
    let b = SymExpr::block(n, "B", 0);
    let phi = SymExpr::block(n, "phi", 0);
    SymExpr::lie_derivative(n, "B", "f")
        .scale(-1.0)
        .sub(&phi.scale(e.e1))
        .add(&phi.mul(&b).mul(&b))
        .sub(&SymExpr::poly(&norm2(n).scale(e.e2)))
}

fn fixed(p: &Polynomial) -> Binding {
    Binding::Fixed(vec![p.clone()])
}

/// Compiles an affine expression, handling odd degree by truncating the
/// Gram basis (forcing the odd top-degree coefficients to vanish).
fn compile_poly(space: &mut CoefficientSpace, label: &str, p: &AffinePoly) -> Result<usize, Error> {
    let deg = p.degree();
    if deg % 2 == 0 {
        space.add_sos_constraint(label, p)
    } else {
        let basis = gram_basis(space.dim(), p.min_degree(), deg - 1);
        space.add_sos_constraint_with_basis(label, p, basis, deg)
    }
}

fn slack_poly(n: usize, half_deg: usize) -> Polynomial {
    (&Polynomial::constant(n, 1.0) + &norm2(n)).pow(half_deg as u32)
}

/// Instantiates `expr` under `bindings` (linearizing `B^2` around `lin` when
/// `B` is free), adds `s * (1 + |x|^2)^(deg/2)` if a slack variable is
/// given, and compiles the SOS constraint.
fn add_constraint(
    space: &mut CoefficientSpace,
    label: &str,
    expr: &SymExpr,
    bindings: &BTreeMap<String, Binding>,
    slack: Option<usize>,
    lin: Option<&Polynomial>,
) -> Result<usize, Error> {
    let free: BTreeSet<String> = bindings
        .iter()
        .filter(|(_, b)| matches!(b, Binding::Free(_)))
        .map(|(k, _)| k.clone())
        .collect();
    let mut e = expr.clone();
    if let Some(b0) = lin {
        if bilinear_structure(&e, &free).squares.contains("B") {
            e = e.linearize_square("B", b0);
        }
    }
    let rep = bilinear_structure(&e, &free);
    if !rep.is_affine() {
        return Err(Error::NotAffine(format!(
            "{label}: free products {:?}, squares {:?}",
            rep.pairs, rep.squares
        )));
    }
    let mut p = e.instantiate(bindings)?;
    if let Some(s) = slack {
        let m = slack_poly(space.dim(), p.degree() / 2);
        let mut sp = AffinePoly::zero(space.dim());
        for (mon, c) in m.terms() {
            sp.add_term(mon.clone(), &AffineForm::var(s, c), 1.0);
        }
        p = p.add(&sp)?;
    }
    compile_poly(space, label, &p)
}

fn solve(ctx: &mut Ctx, space: &CoefficientSpace, round: usize, phase: &str) -> Result<SdpSolution, LearnError> {
    let sol = sdp::solve(space.problem(), &ctx.opts)?;
    ctx.record(round, phase, &sol);
    if sol.status != SolveStatus::Optimal {
        if let Ok(dir) = std::env::var("CERTDS_DEBUG_DUMP") {
            let _ = std::fs::write(format!("{dir}/{phase}_{round}.json"), space.problem().to_json());
        }
        return Err(LearnError::Infeasible {
            phase: phase.to_string(),
            status: sol.status,
            suggestion: ctx.suggestion(),
            last_feasible: None,
        });
    }
    Ok(sol)
}

fn add_box(space: &mut CoefficientSpace, var: usize, bound: f64) {
    for sign in [1.0, -1.0] {
        let mut f = AffineForm::var(var, sign);
        f.constant = bound;
        space.add_nonnegative(&f);
    }
}

fn sos_basis(n: usize, deg: usize) -> Vec<crate::poly::Monomial> {
    monomial_basis(n, deg / 2)
}

// ---- phases ----

/// Fits `f` (and `phi` when a barrier is present) with `V` and `B` fixed.
/// Returns the fitting objective and the flow-constraint slack.
fn phase_f(ctx: &mut Ctx, st: &mut State, round: usize, penalty: f64) -> Result<(f64, Option<f64>), LearnError> {
    let n = ctx.n;
    let e = Eps::of(ctx.cfg, 1.0 + EPS_MARGIN);
    let mut space = CoefficientSpace::new(n);
    space.add_free_vector("f", &ctx.f_support())?;
    let mut bind = BTreeMap::new();
    bind.insert("f".to_string(), space.free_binding("f")?);
    bind.insert("V".to_string(), fixed(&st.v));
    add_constraint(&mut space, LYAP_DEC, &expr_v_dec(n, e), &bind, None, None)?;
    let mut slack = None;
    if let Some(b) = &st.b {
        space.add_sos_poly("phi", sos_basis(n, ctx.phi_deg))?;
        for var in space.block("phi")?.vars.clone() {
            add_box(&mut space, var, PHI_BOX);
        }
        bind.insert("phi".to_string(), space.free_binding("phi")?);
        bind.insert("B".to_string(), fixed(b));
        let s = space.problem_mut().add_var();
        space.add_nonnegative(&AffineForm::var(s, 1.0));
        add_constraint(&mut space, BAR_FLOW, &expr_flow(n, e), &bind, Some(s), None)?;
        slack = Some(s);
    }
    let mut ls = LeastSquares::default();
    for (x, v) in ctx.xs.iter().zip(&ctx.vs) {
        for (k, comp) in space.block("f")?.components.iter().enumerate() {
            let form = comp.at_point(x)?;
            ls.rows.push((form.terms(), v[k] - form.constant));
        }
    }
    sdp::reduce_least_squares(space.problem_mut(), &ls)?;
    if let Some(s) = slack {
        space.problem_mut().objective[s] = penalty;
    }
    let sol = solve(ctx, &space, round, "dynamics")?;
    st.f = space.extract("f", &sol.primal)?;
    if st.b.is_some() {
        st.phi = Some(space.extract("phi", &sol.primal)?.remove(0));
    }
    Ok((ctx.fit_objective(&st.f), slack.map(|s| sol.primal[s])))
}

/// Re-solves `phi` with `f` and `B` fixed, minimizing the flow slack.
fn phase_phi(ctx: &mut Ctx, st: &mut State, round: usize) -> Result<f64, LearnError> {
    let n = ctx.n;
    let e = Eps::of(ctx.cfg, 1.0 + EPS_MARGIN);
    let mut space = CoefficientSpace::new(n);
    space.add_sos_poly("phi", sos_basis(n, ctx.phi_deg))?;
    for var in space.block("phi")?.vars.clone() {
        add_box(&mut space, var, PHI_BOX);
    }
    let mut bind = BTreeMap::new();
    bind.insert("phi".to_string(), space.free_binding("phi")?);
    bind.insert("f".to_string(), Binding::Fixed(st.f.clone()));
    bind.insert("B".to_string(), fixed(st.b.as_ref().expect("multiplier phase needs B")));
    let s = space.problem_mut().add_var();
    space.add_nonnegative(&AffineForm::var(s, 1.0));
    add_constraint(&mut space, BAR_FLOW, &expr_flow(n, e), &bind, Some(s), None)?;
    space.problem_mut().objective[s] = 1.0;
    let sol = solve(ctx, &space, round, "multiplier")?;
    st.phi = Some(space.extract("phi", &sol.primal)?.remove(0));
    Ok(sol.primal[s])
}

/// Re-shapes `V` with `f` fixed so the demonstrations themselves decrease
/// it: maximizes the mean of the normalized decrease rates
/// `-grad V(x_i) . v_i / (|x_i| |v_i|)`, each capped at `HINGE_CAP`.
///
/// With `coupled` unset the decrease condition for the current `f` is
/// dropped, giving a Lyapunov candidate shaped by the data alone.
fn phase_v(ctx: &mut Ctx, st: &mut State, round: usize, coupled: bool) -> Result<(), LearnError> {
    let n = ctx.n;
    let e = Eps::of(ctx.cfg, 1.0 + EPS_MARGIN);
    let mut space = CoefficientSpace::new(n);
    let support = monomial_range(n, 2, ctx.cfg.deg_v);
    space.add_free_poly("V", support.clone())?;
    let mut bind = BTreeMap::new();
    bind.insert("V".to_string(), space.free_binding("V")?);
    bind.insert("f".to_string(), Binding::Fixed(st.f.clone()));
    add_constraint(&mut space, LYAP_POS, &expr_v_pos(n, e), &bind, None, None)?;
    if coupled {
        add_constraint(&mut space, LYAP_DEC, &expr_v_dec(n, e), &bind, None, None)?;
    }
    let v = space.poly("V", 0)?.clone();
    let grad: Vec<AffinePoly> = (0..n).map(|k| v.partial(k)).collect();
    let mut total = AffineForm::default();
    let mut target = 0.0;
    let mut hinge = Vec::new();
    for (x, vel) in ctx.xs.iter().zip(&ctx.vs) {
        let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = vel.iter().map(|a| a * a).sum::<f64>().sqrt();
        total.add_scaled(&v.at_point(x)?, 1.0);
        target += st.v.eval(x);
        if nx < 1e-6 || nv < 1e-9 {
            continue;
        }
        // h <= min(decrease rate along the sample velocity, HINGE_CAP)
        let h = space.problem_mut().add_var();
        let mut form = AffineForm::var(h, -1.0);
        for (k, g) in grad.iter().enumerate() {
            form.add_scaled(&g.at_point(x)?, -vel[k] / (nx * nv));
        }
        space.add_nonnegative(&form);
        let mut cap = AffineForm::var(h, -1.0);
        cap.constant = HINGE_CAP;
        space.add_nonnegative(&cap);
        hinge.push(h);
    }
    total.constant -= target;
    space.add_equality(&total);
    let bound = 10.0 * st.v.max_abs_coefficient().max(1.0);
    for var in space.block("V")?.vars.clone() {
        add_box(&mut space, var, bound);
    }
    for &h in &hinge {
        space.problem_mut().objective[h] = -1.0 / hinge.len() as f64;
    }
    let phase = if coupled { "lyapunov" } else { "lyapunov_data" };
    match solve(ctx, &space, round, phase) {
        Ok(sol) => {
            st.v = space.extract("V", &sol.primal)?.remove(0);
            Ok(())
        }
        Err(LearnError::Infeasible { status, .. }) => {
            // The previous V stays feasible; keep it.
            ctx.diag.notes.push(format!(
                "round {round}: lyapunov phase returned {status:?}, kept previous V"
            ));
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// Re-solves `B` and the set multipliers with `f` and `phi` fixed, minimizing
/// a common slack on the three barrier conditions. The `B^2` term is replaced
/// by its affine minorant at the current `B`.
fn phase_b(ctx: &mut Ctx, st: &mut State, round: usize) -> Result<f64, LearnError> {
    let n = ctx.n;
    let e = Eps::of(ctx.cfg, 1.0 + EPS_MARGIN);
    let b0 = st.b.clone().expect("barrier phase needs B");
    let phi = st.phi.clone().expect("barrier phase needs phi");
    let mut space = CoefficientSpace::new(n);
    space.add_free_poly("B", monomial_basis(n, ctx.cfg.deg_b))?;
    let mut bind = BTreeMap::new();
    bind.insert("B".to_string(), space.free_binding("B")?);
    bind.insert("f".to_string(), Binding::Fixed(st.f.clone()));
    bind.insert("phi".to_string(), fixed(&phi));
    let s = space.problem_mut().add_var();
    space.add_nonnegative(&{
        let mut f = AffineForm::var(s, 1.0);
        f.constant = SLACK_FLOOR;
        f
    });
    if let Some(x0) = ctx.x0 {
        for (i, &d) in ctx.tau_deg.iter().enumerate() {
            space.add_sos_poly(&tau_name(i), sos_basis(n, d))?;
            bind.insert(tau_name(i), space.free_binding(&tau_name(i))?);
        }
        add_constraint(&mut space, BAR_INIT, &expr_init(n, x0), &bind, Some(s), None)?;
    }
    for (j, set) in ctx.xu.iter().enumerate() {
        for (i, &d) in ctx.sigma_deg[j].iter().enumerate() {
            space.add_sos_poly(&sigma_name(j, i), sos_basis(n, d))?;
            bind.insert(sigma_name(j, i), space.free_binding(&sigma_name(j, i))?);
        }
        add_constraint(
            &mut space,
            &bar_unsafe(j),
            &expr_unsafe(n, j, set, e),
            &bind,
            Some(s),
            None,
        )?;
    }
    add_constraint(&mut space, BAR_FLOW, &expr_flow(n, e), &bind, Some(s), Some(&b0))?;
    for var in space.block("B")?.vars.clone() {
        add_box(&mut space, var, ctx.b_box);
    }
    let bpoly = space.poly("B", 0)?.clone();
    let d = ctx.cfg.deg_b;
    if d % 2 == 0 {
        // Keeps the top form of B definite; otherwise the flow condition's
        // top form `phi B^2` has real zeros and no slack below zero exists.
        let mut top = AffinePoly::zero(n);
        for (m, form) in bpoly.terms() {
            if m.degree() == d {
                top.add_term(m.clone(), form, 1.0);
            }
        }
        let floor = norm2(n).pow((d / 2) as u32).scale(TOP_MARGIN);
        top = top.sub(&AffinePoly::from_polynomial(&floor))?;
        space.add_sos_constraint("barrier_top", &top)?;
    }
    let origin = vec![0.0; n];
    for x in ctx.xs.iter().chain(std::iter::once(&origin)) {
        let mut form = bpoly.at_point(x)?;
        form.add_scaled(&AffineForm::constant(REF_MARGIN), 1.0);
        space.add_nonnegative(&{
            let mut neg = AffineForm::default();
            neg.add_scaled(&form, -1.0);
            neg
        });
    }
    space.problem_mut().objective[s] = 1.0;
    let sol = solve(ctx, &space, round, "barrier")?;
    st.b = Some(space.extract("B", &sol.primal)?.remove(0));
    st.tau = (0..ctx.tau_deg.len())
        .map(|i| Ok(space.extract(&tau_name(i), &sol.primal)?.remove(0)))
        .collect::<Result<_, Error>>()?;
    st.sigma = ctx
        .sigma_deg
        .iter()
        .enumerate()
        .map(|(j, ds)| {
            (0..ds.len())
                .map(|i| Ok(space.extract(&sigma_name(j, i), &sol.primal)?.remove(0)))
                .collect::<Result<Vec<_>, Error>>()
        })
        .collect::<Result<_, Error>>()?;
    Ok(sol.primal[s])
}

/// Weighted ridge least-squares fit of a degree-`deg_b` polynomial to `+1`
/// on unsafe samples and on their backward orbits under the current `f`
/// (where `{B > 0}` must reach), and `-1` on reference, initial-set and
/// origin samples. The result is shifted so every reference sample has
/// `B <= -REF_MARGIN`.
fn init_barrier(ctx: &mut Ctx, f: &[Polynomial]) -> Result<Polynomial, LearnError> {
    let n = ctx.n;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let fallback = BoundingBox::symmetric(n, 2.0);
    let mut groups: Vec<(Vec<Vec<f64>>, f64)> = vec![(ctx.xs.clone(), -1.0), (vec![vec![0.0; n]], -1.0)];
    if let Some(x0) = ctx.x0 {
        // Best effort: a thin initial set may defeat rejection sampling.
        groups.push((
            x0.sample_members(&mut rng, &fallback, 50, 200_000).unwrap_or_default(),
            -1.0,
        ));
    }
    let unsafe_pts: Vec<Vec<Vec<f64>>> = ctx
        .xu
        .iter()
        .map(|set| set.sample_members(&mut rng, &fallback, ctx.cfg.unsafe_samples, 1_000_000))
        .collect::<Result<_, Error>>()?;
    let radius = ctx
        .xs
        .iter()
        .chain(unsafe_pts.iter().flatten())
        .map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let back = PolynomialVector::new(f.iter().map(|p| p.scale(-1.0)).collect())?;
    for pts in unsafe_pts {
        let mut shadow = Vec::new();
        for start in pts.iter().step_by((pts.len() / 40).max(1)) {
            let mut x = start.clone();
            for step in 1..=SHADOW_STEPS {
                x = crate::dynsim::rk4_step(&back, &x, SHADOW_DT);
                let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                if !(r <= 1.5 * radius) {
                    break;
                }
                if step % 5 == 0 {
                    shadow.push(x.clone());
                }
            }
        }
        groups.push((pts, 1.0));
        groups.push((shadow, 1.0));
    }
    let basis = monomial_basis(n, ctx.cfg.deg_b);
    let rows: usize = groups.iter().map(|g| g.0.len()).sum::<usize>() + basis.len();
    let mut a = DMatrix::zeros(rows, basis.len());
    let mut y = DVector::zeros(rows);
    let mut r = 0;
    for (pts, target) in &groups {
        let w = (1.0 / pts.len().max(1) as f64).sqrt();
        for x in pts {
            for (c, m) in basis.iter().enumerate() {
                a[(r, c)] = w * m.evaluate(x);
            }
            y[r] = w * target;
            r += 1;
        }
    }
    for c in 0..basis.len() {
        a[(r + c, c)] = RIDGE.sqrt();
    }
    let coef = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let b = Polynomial::from_terms(n, basis.into_iter().zip(coef.iter().copied()))?;
    let worst = ctx
        .xs
        .iter()
        .map(|x| b.eval(x))
        .chain(std::iter::once(b.eval(&vec![0.0; n])))
        .fold(f64::NEG_INFINITY, f64::max);
    let b = &b - &Polynomial::constant(n, worst.max(0.0) + 1e-3);
    log::debug!(
        "initial barrier: max |coef| {:.3e}, min over unsafe samples {:.3e}",
        b.max_abs_coefficient(),
        groups
            .iter()
            .filter(|g| g.1 > 0.0)
            .flat_map(|g| g.0.iter())
            .map(|x| b.eval(x))
            .fold(f64::INFINITY, f64::min)
    );
    Ok(b)
}

/// Stability-only rounds: dynamics phase, then Lyapunov phase, until the
/// fitting objective stalls.
fn stability_rounds(ctx: &mut Ctx, st: &mut State) -> Result<(), LearnError> {
    let mut prev = ctx.fit_objective(&st.f);
    for round in 0..ctx.cfg.max_rounds {
        let (mut obj, _) = phase_f(ctx, st, round, 0.0)?;
        if round == 0 {
            obj = try_data_lyapunov(ctx, st, obj)?;
        }
        ctx.diag.objective_trace.push(obj);
        ctx.diag.rounds = round + 1;
        let small = obj <= 1e-12 * ctx.xs.len() as f64;
        if small || (round > 0 && prev - obj <= ctx.cfg.tol * prev) {
            break;
        }
        prev = obj;
        if round + 1 < ctx.cfg.max_rounds {
            phase_v(ctx, st, round, true)?;
        }
    }
    Ok(())
}

/// Replaces `(f, V)` by the data-shaped Lyapunov candidate and its fitted
/// dynamics when that lowers the fitting objective.
fn try_data_lyapunov(ctx: &mut Ctx, st: &mut State, obj: f64) -> Result<f64, LearnError> {
    let mut trial = st.clone();
    phase_v(ctx, &mut trial, 0, false)?;
    if trial.v == st.v {
        return Ok(obj);
    }
    match phase_f(ctx, &mut trial, 0, 0.0) {
        Ok((trial_obj, _)) if trial_obj < obj => {
            *st = trial;
            Ok(trial_obj)
        }
        Ok(_) | Err(LearnError::Infeasible { .. }) => Ok(obj),
        Err(e) => Err(e),
    }
}

fn multiplier_basis_certificate(label: String, p: &Polynomial) -> Option<(String, Polynomial)> {
    if p.is_zero() {
        None
    } else {
        Some((label, p.clone()))
    }
}

/// Polynomials that must be SOS for `result`, evaluated at the configured
/// epsilons with the stored multipliers.
pub fn certificate_expressions(
    result: &LearnResult,
    x0: Option<&BasicSemialgebraicSet>,
    xu: &[BasicSemialgebraicSet],
) -> Result<Vec<(String, Polynomial)>, Error> {
    let n = result.v.dim();
    let e = Eps::of(&result.config, 1.0);
    let mut bind = BTreeMap::new();
    bind.insert("f".to_string(), Binding::Fixed(result.f.components().to_vec()));
    bind.insert("V".to_string(), fixed(&result.v));
    let mut out = vec![
        (LYAP_POS.to_string(), expr_v_pos(n, e).instantiate(&bind)?.evaluate(&[])),
        (LYAP_DEC.to_string(), expr_v_dec(n, e).instantiate(&bind)?.evaluate(&[])),
    ];
    let Some(b) = &result.b else {
        return Ok(out);
    };
    bind.insert("B".to_string(), fixed(b));
    let phi = result
        .phi
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("barrier result without phi".into()))?;
    bind.insert("phi".to_string(), fixed(phi));
    if let Some(x0) = x0 {
        if result.tau.len() != x0.inequalities().len() {
            return Err(Error::InvalidInput(
                "tau multipliers do not match the initial set".into(),
            ));
        }
        for (i, t) in result.tau.iter().enumerate() {
            bind.insert(tau_name(i), fixed(t));
            out.extend(multiplier_basis_certificate(format!("multiplier_{}", tau_name(i)), t));
        }
        out.push((BAR_INIT.to_string(), expr_init(n, x0).instantiate(&bind)?.evaluate(&[])));
    }
    if result.sigma.len() != xu.len() {
        return Err(Error::InvalidInput(
            "sigma multipliers do not match the unsafe sets".into(),
        ));
    }
    for (j, set) in xu.iter().enumerate() {
        if result.sigma[j].len() != set.inequalities().len() {
            return Err(Error::InvalidInput(format!(
                "sigma multipliers do not match unsafe set {j}"
            )));
        }
        for (i, s) in result.sigma[j].iter().enumerate() {
            bind.insert(sigma_name(j, i), fixed(s));
            out.extend(multiplier_basis_certificate(
                format!("multiplier_{}", sigma_name(j, i)),
                s,
            ));
        }
        out.push((
            bar_unsafe(j),
            expr_unsafe(n, j, set, e).instantiate(&bind)?.evaluate(&[]),
        ));
    }
    out.extend(multiplier_basis_certificate("multiplier_phi".into(), phi));
    out.push((BAR_FLOW.to_string(), expr_flow(n, e).instantiate(&bind)?.evaluate(&[])));
    Ok(out)
}

fn check_certificate(label: &str, cert: &GramCertificate, p: &Polynomial) -> Result<(), LearnError> {
    let eig = cert.min_eigenvalue();
    if eig < -CERT_EIG_TOL {
        return Err(LearnError::Verification {
            label: label.to_string(),
            reason: format!("Gram min eigenvalue {eig:.3e}"),
        });
    }
    let res = cert.residual(p);
    if res > CERT_COEF_TOL {
        return Err(LearnError::Verification {
            label: label.to_string(),
            reason: format!("coefficient mismatch {res:.3e}"),
        });
    }
    Ok(())
}

/// Independently recomputes every constraint polynomial and checks the
/// stored Gram certificates against it.
pub fn verify_certificates(
    result: &LearnResult,
    x0: Option<&BasicSemialgebraicSet>,
    xu: &[BasicSemialgebraicSet],
) -> Result<(), LearnError> {
    for (label, p) in certificate_expressions(result, x0, xu)? {
        let cert = result
            .gram_certificates
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| LearnError::Verification {
                label: label.clone(),
                reason: "missing certificate".into(),
            })?;
        check_certificate(&label, &cert.certificate, &p)?;
    }
    Ok(())
}

/// Final certification with `f`, `V`, `B` fixed at the configured epsilons.
/// Multipliers are re-solved (they enter affinely) and then certified too.
fn certify(ctx: &mut Ctx, st: &mut State) -> Result<Vec<NamedCertificate>, LearnError> {
    let n = ctx.n;
    if let Some(b) = st.b.clone() {
        let e = Eps::of(ctx.cfg, 1.0);
        let mut space = CoefficientSpace::new(n);
        // A pure feasibility problem here sits on the boundary of the SOS
        // cone; a common slack gives the solver a strict interior. The Gram
        // checks below decide whether the multipliers are good enough.
        let s = space.problem_mut().add_var();
        space.add_nonnegative(&{
            let mut f = AffineForm::var(s, 1.0);
            f.constant = SLACK_FLOOR;
            f
        });
        space.problem_mut().objective[s] = 1.0;
        let mut bind = BTreeMap::new();
        bind.insert("B".to_string(), fixed(&b));
        bind.insert("f".to_string(), Binding::Fixed(st.f.clone()));
        space.add_sos_poly("phi", sos_basis(n, ctx.phi_deg))?;
        bind.insert("phi".to_string(), space.free_binding("phi")?);
        if let Some(x0) = ctx.x0 {
            for (i, &d) in ctx.tau_deg.iter().enumerate() {
                space.add_sos_poly(&tau_name(i), sos_basis(n, d))?;
                bind.insert(tau_name(i), space.free_binding(&tau_name(i))?);
            }
            add_constraint(&mut space, BAR_INIT, &expr_init(n, x0), &bind, Some(s), None)?;
        }
        for (j, set) in ctx.xu.iter().enumerate() {
            for (i, &d) in ctx.sigma_deg[j].iter().enumerate() {
                space.add_sos_poly(&sigma_name(j, i), sos_basis(n, d))?;
                bind.insert(sigma_name(j, i), space.free_binding(&sigma_name(j, i))?);
            }
            add_constraint(
                &mut space,
                &bar_unsafe(j),
                &expr_unsafe(n, j, set, e),
                &bind,
                Some(s),
                None,
            )?;
        }
        add_constraint(&mut space, BAR_FLOW, &expr_flow(n, e), &bind, Some(s), None)?;
        let round = ctx.diag.rounds;
        let sol = solve(ctx, &space, round, "certify_multipliers")?;
        if sol.primal[s] > SLACK_TOL {
            return Err(LearnError::Verification {
                label: "multipliers".into(),
                reason: format!("best common slack {:.3e} is positive", sol.primal[s]),
            });
        }
        st.phi = Some(space.extract("phi", &sol.primal)?.remove(0));
        st.tau = (0..ctx.tau_deg.len())
            .map(|i| Ok(space.extract(&tau_name(i), &sol.primal)?.remove(0)))
            .collect::<Result<_, Error>>()?;
        st.sigma = ctx
            .sigma_deg
            .iter()
            .enumerate()
            .map(|(j, ds)| {
                (0..ds.len())
                    .map(|i| Ok(space.extract(&sigma_name(j, i), &sol.primal)?.remove(0)))
                    .collect::<Result<Vec<_>, Error>>()
            })
            .collect::<Result<_, Error>>()?;
    }
    let draft = ctx.result(st, Vec::new())?;
    let mut certs = Vec::new();
    for (label, p) in certificate_expressions(&draft, ctx.x0, ctx.xu)? {
        let mut space = CoefficientSpace::new(n);
        let idx = compile_poly(&mut space, &label, &AffinePoly::from_polynomial(&p))?;
        let sol = sdp::solve(space.problem(), &ctx.opts)?;
        if !sol.is_optimal() {
            return Err(LearnError::Verification {
                label,
                reason: format!("certificate search returned {:?}", sol.status),
            });
        }
        let cert = space.certificate(idx, &sol.primal);
        check_certificate(&label, &cert, &p)?;
        certs.push(NamedCertificate {
            label,
            certificate: cert,
        });
    }
    Ok(certs)
}

pub(super) fn warm_state(n: usize, a: &DMatrix<f64>) -> State {
    let f = (0..n)
        .map(|k| {
            let mut p = Polynomial::zero(n);
            for j in 0..n {
                p = &p + &Polynomial::var(n, j).scale(a[(k, j)]);
            }
            p
        })
        .collect();
    State {
        f,
        v: norm2(n),
        b: None,
        phi: None,
        tau: Vec::new(),
        sigma: Vec::new(),
    }
}

pub(super) fn finish(ctx: &mut Ctx, mut st: State) -> Result<LearnResult, LearnError> {
    let certs = certify(ctx, &mut st)?;
    ctx.result(&st, certs)
}

/// Learns `f` and `V` without barrier constraints.
pub fn learn_unconstrained(ds: &TrajectoryDataset, cfg: &LearnConfig) -> Result<LearnResult, LearnError> {
    let mut ctx = Ctx::new(ds, cfg, None, &[])?;
    let a = super::warm::solve_warm(&mut ctx)?;
    let mut st = warm_state(ds.dim(), &a);
    stability_rounds(&mut ctx, &mut st)?;
    finish(&mut ctx, st)
}

/// Learns `f`, `V` and a barrier `B` separating the initial set from every
/// unsafe set.
pub fn learn(
    ds: &TrajectoryDataset,
    x0: &BasicSemialgebraicSet,
    xu: &[BasicSemialgebraicSet],
    cfg: &LearnConfig,
) -> Result<LearnResult, LearnError> {
    let n = ds.dim();
    for (j, set) in xu.iter().enumerate() {
        if set.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: set.dim(),
            }
            .into());
        }
        if set.contains(&vec![0.0; n])? {
            return Err(LearnError::AttractorInUnsafeSet(j));
        }
        for (i, s) in ds.samples().enumerate() {
            if set.contains(&s.x)? {
                return Err(LearnError::SampleInUnsafeSet { index: i, set: j });
            }
        }
    }
    if xu.is_empty() {
        return learn_unconstrained(ds, cfg);
    }
    let mut ctx = Ctx::new(ds, cfg, Some(x0), xu)?;
    let a = super::warm::solve_warm(&mut ctx)?;
    let mut st = warm_state(n, &a);
    stability_rounds(&mut ctx, &mut st)?;
    let b_init = init_barrier(&mut ctx, &st.f.clone())?;
    ctx.b_box = 10.0 * b_init.max_abs_coefficient().max(1.0);
    st.b = Some(b_init);
    st.phi = Some(Polynomial::constant(n, 1.0));

    let start = ctx.diag.rounds;
    let mut slack = f64::INFINITY;
    let mut candidates: Vec<(f64, State)> = Vec::new();
    let mut prev_slack = f64::INFINITY;
    let mut next_attempt = CERTIFY_SLACK;
    // An obstacle that does not conflict with the fitted dynamics is
    // certified here and leaves the fit untouched.
    for round in start..start + FIXED_F_ROUNDS {
        let step = phase_b(&mut ctx, &mut st, round).and_then(|s_b| Ok((s_b, phase_phi(&mut ctx, &mut st, round)?)));
        let (s_b, s_f) = match step {
            Ok(v) => v,
            Err(LearnError::Infeasible { phase, status, .. }) => {
                ctx.diag
                    .notes
                    .push(format!("round {round}: {phase} phase returned {status:?} with f fixed"));
                break;
            }
            Err(e) => return Err(e),
        };
        slack = s_b.max(s_f);
        ctx.diag.rounds = round + 1;
        ctx.diag.barrier_slack = Some(slack);
        log::info!("round {round}: barrier slack {s_b:.3e}, flow slack {s_f:.3e} with f fixed");
        if slack <= next_attempt {
            match finish(&mut ctx, st.clone()) {
                Ok(r) => return Ok(r),
                Err(e) => log::debug!("certification with f fixed failed: {e}"),
            }
            next_attempt = slack / 2.0;
        }
        if slack > (1.0 - FIXED_F_PROGRESS) * prev_slack {
            break;
        }
        prev_slack = slack;
    }

    let mut penalty = 10.0 * ctx.fit_objective(&st.f).max(1.0);
    let mut prev = f64::INFINITY;
    let start = ctx.diag.rounds;
    for round in start..start + cfg.max_rounds {
        let step = phase_b(&mut ctx, &mut st, round).and_then(|s_b| {
            let (obj, s_f) = phase_f(&mut ctx, &mut st, round, penalty)?;
            Ok((s_b, obj, s_f.unwrap_or(0.0)))
        });
        let (s_b, obj, s_f) = match step {
            Ok(v) => v,
            Err(LearnError::Infeasible { phase, status, .. }) => {
                ctx.diag
                    .notes
                    .push(format!("round {round}: {phase} phase returned {status:?}, stopping"));
                break;
            }
            Err(e) => return Err(e),
        };
        slack = s_b.max(s_f);
        ctx.diag.objective_trace.push(obj);
        ctx.diag.rounds = round + 1;
        ctx.diag.barrier_slack = Some(slack);
        log::info!("round {round}: barrier slack {s_b:.3e}, flow slack {s_f:.3e}, fit {obj:.6e}");
        if slack <= SLACK_TOL {
            candidates.push((obj, st.clone()));
            if prev.is_finite() && prev - obj <= cfg.tol * prev {
                break;
            }
            prev = obj;
        } else {
            penalty = (penalty * 10.0).min(MAX_PENALTY);
        }
        phase_v(&mut ctx, &mut st, round, true)?;
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut last_err = None;
    for (_, good) in candidates.into_iter().take(MAX_CERTIFY_ATTEMPTS) {
        match finish(&mut ctx, good) {
            Ok(r) => return Ok(r),
            Err(e) => {
                ctx.diag.notes.push(format!("candidate rejected: {e}"));
                last_err = Some(e);
            }
        }
    }
    if let Some(e) = last_err {
        return Err(e);
    }
    let last = ctx.result(&st, Vec::new()).ok().map(Box::new);
    Err(LearnError::NotCertified {
        rounds: ctx.diag.rounds,
        slack,
        suggestion: ctx.suggestion(),
        last_feasible: last,
    })
}
