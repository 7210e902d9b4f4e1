//! Small dense semidefinite programs in "LMI" form:
//!
//! ```text
//! minimize    c' y + c0
//! subject to  F_j(y) = C_j + sum_i y_i A_ij  >= 0   for every block j
//!             a_k' y = b_k                          for every equality k
//! ```
//!
//! Equalities are eliminated by an orthonormal nullspace basis before the
//! cone solve; the cone solve itself is the homogeneous self-dual
//! interior-point method in [`ipm`].

mod ipm;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use ipm::{ConicProblem, IpmStatus, Layout};

/// Symmetric-matrix-valued affine map of the decision vector. Only the lower
/// triangle (`row >= col`) is stored; the upper triangle mirrors it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub size: usize,
    /// `(row, col, value)` entries of the constant matrix.
    pub constant: Vec<(usize, usize, f64)>,
    /// `(var, row, col, coefficient)` entries.
    pub coeffs: Vec<(usize, usize, usize, f64)>,
}

impl LmiBlock {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            constant: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// `[y_var] >= 0` style scalar block `c + sum a_i y_i >= 0`.
    pub fn scalar(constant: f64, terms: &[(usize, f64)]) -> Self {
        let mut b = Self::new(1);
        if constant != 0.0 {
            b.constant.push((0, 0, constant));
        }
        for &(v, a) in terms {
            b.coeffs.push((v, 0, 0, a));
        }
        b
    }

    fn lower(r: usize, c: usize) -> (usize, usize) {
        if r >= c {
            (r, c)
        } else {
            (c, r)
        }
    }

    pub fn add_constant(&mut self, row: usize, col: usize, v: f64) {
        let (r, c) = Self::lower(row, col);
        self.constant.push((r, c, v));
    }

    pub fn add_coeff(&mut self, var: usize, row: usize, col: usize, v: f64) {
        let (r, c) = Self::lower(row, col);
        self.coeffs.push((var, r, c, v));
    }

    /// Evaluates the block at `y`.
    pub fn evaluate(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.constant {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        for &(var, r, c, a) in &self.coeffs {
            let v = a * y[var];
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    fn validate(&self, num_vars: usize) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidInput("LMI block of size 0".into()));
        }
        let bad_entry = self.constant.iter().any(|&(r, c, _)| r >= self.size || c >= self.size)
            || self
                .coeffs
                .iter()
                .any(|&(v, r, c, _)| v >= num_vars || r >= self.size || c >= self.size);
        if bad_entry {
            return Err(Error::InvalidInput("LMI entry out of range".into()));
        }
        let non_finite = self.constant.iter().any(|e| !e.2.is_finite()) || self.coeffs.iter().any(|e| !e.3.is_finite());
        if non_finite {
            return Err(Error::InvalidInput("non-finite LMI entry".into()));
        }
        Ok(())
    }
}

/// Sparse affine equality `sum coeffs = rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub num_vars: usize,
    /// Dense linear cost `c` (length `num_vars`).
    pub objective: Vec<f64>,
    #[serde(default)]
    pub objective_constant: f64,
    pub blocks: Vec<LmiBlock>,
    pub equalities: Vec<Equality>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    /// Appends a fresh scalar decision variable and returns its index.
    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn add_vars(&mut self, count: usize) -> std::ops::Range<usize> {
        let start = self.num_vars;
        self.num_vars += count;
        self.objective.resize(self.num_vars, 0.0);
        start..self.num_vars
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                found: self.objective.len(),
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite objective".into()));
        }
        for b in &self.blocks {
            b.validate(self.num_vars)?;
        }
        for eq in &self.equalities {
            if eq.coeffs.iter().any(|&(v, a)| v >= self.num_vars || !a.is_finite()) || !eq.rhs.is_finite() {
                return Err(Error::InvalidInput("bad equality row".into()));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(y).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SdpProblem = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// The objective is unbounded below on the feasible set.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub block_min_eigenvalues: Vec<f64>,
    pub equality_residual: f64,
    pub iterations: usize,
    /// For infeasible problems: one PSD matrix per block, `Z_j`, with
    /// `sum_j <A_ij, Z_j> = 0` on the equality nullspace and `sum_j <C_j, Z_j> < 0`.
    pub certificate: Option<Vec<Vec<f64>>>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.block_min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Convex quadratic objective term `sum_i (a_i' y - b_i)^2`.
#[derive(Clone, Debug, Default)]
pub struct LeastSquares {
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
}

/// Replaces the least-squares term by an epigraph variable `t` constrained by
/// the Schur-complement block `[[t, r'], [r, I]] >= 0` with `r` the
/// QR-compressed residual, and adds `t` (plus the constant remainder) to the
/// objective. Returns the index of `t`.
pub fn reduce_least_squares(problem: &mut SdpProblem, ls: &LeastSquares) -> Result<usize> {
    let mut vars: Vec<usize> = ls.rows.iter().flat_map(|(r, _)| r.iter().map(|e| e.0)).collect();
    vars.sort_unstable();
    vars.dedup();
    if let Some(&v) = vars.last() {
        if v >= problem.num_vars {
            return Err(Error::InvalidInput(
                "least-squares row references unknown variable".into(),
            ));
        }
    }
    let k = vars.len();
    let nrows = ls.rows.len();
    let col_of = |v: usize| vars.binary_search(&v).expect("collected");
    let mut aug = DMatrix::zeros(nrows.max(k + 1), k + 1);
    for (i, (row, b)) in ls.rows.iter().enumerate() {
        for &(v, a) in row {
            aug[(i, col_of(v))] += a;
        }
        aug[(i, k)] = *b;
    }
    // ||L y - b||^2 = ||R11 y - R12||^2 + R22^2 with [L | b] = Q R.
    let r = aug.qr().r();
    let mut t_idx_rows = Vec::with_capacity(k);
    for i in 0..k {
        let coeffs: Vec<(usize, f64)> = (i..k)
            .filter(|&j| r[(i, j)] != 0.0)
            .map(|j| (vars[j], r[(i, j)]))
            .collect();
        t_idx_rows.push((coeffs, r[(i, k)]));
    }
    let remainder = if r.nrows() > k { r[(k, k)].powi(2) } else { 0.0 };
    let t = add_epigraph_block(problem, &t_idx_rows);
    problem.objective_constant += remainder;
    Ok(t)
}

/// General convex quadratic `y_S' Q y_S + q' y_S` over the variables `vars`.
/// Rejects `Q` with an eigenvalue below `-1e-10 * max|eig|`.
pub fn reduce_quadratic_objective(
    problem: &mut SdpProblem,
    vars: &[usize],
    q: &DMatrix<f64>,
    linear: &[f64],
) -> Result<usize> {
    let k = vars.len();
    if q.nrows() != k || q.ncols() != k || linear.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: q.nrows(),
        });
    }
    if vars.iter().any(|&v| v >= problem.num_vars) {
        return Err(Error::InvalidInput("quadratic references unknown variable".into()));
    }
    let sym = 0.5 * (q + q.transpose());
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.amax().max(1e-300);
    if eig.eigenvalues.min() < -1e-10 * scale {
        return Err(Error::InvalidInput(format!(
            "indefinite quadratic objective (min eigenvalue {:.3e})",
            eig.eigenvalues.min()
        )));
    }
    // Q = sum_i l_i u_i u_i'  ->  rows sqrt(l_i) u_i'
    let mut rows = Vec::new();
    for i in 0..k {
        let l = eig.eigenvalues[i];
        if l <= 1e-14 * scale {
            continue;
        }
        let sl = l.sqrt();
        let coeffs: Vec<(usize, f64)> = (0..k)
            .map(|j| (vars[j], sl * eig.eigenvectors[(j, i)]))
            .filter(|e| e.1 != 0.0)
            .collect();
        rows.push((coeffs, 0.0));
    }
    let t = add_epigraph_block(problem, &rows);
    for (j, &v) in vars.iter().enumerate() {
        problem.objective[v] += linear[j];
    }
    Ok(t)
}

fn add_epigraph_block(problem: &mut SdpProblem, rows: &[(Vec<(usize, f64)>, f64)]) -> usize {
    let t = problem.add_var();
    problem.objective[t] += 1.0;
    let m = rows.len();
    let mut block = LmiBlock::new(m + 1);
    block.add_coeff(t, 0, 0, 1.0);
    for (i, (coeffs, b)) in rows.iter().enumerate() {
        for &(v, a) in coeffs {
            block.add_coeff(v, i + 1, 0, a);
        }
        if *b != 0.0 {
            block.add_constant(i + 1, 0, -b);
        }
        block.add_constant(i + 1, i + 1, 1.0);
    }
    problem.blocks.push(block);
    t
}

/// Orthonormal nullspace parameterization `y = y0 + N w` of the equality system.
struct Elimination {
    y0: DVector<f64>,
    basis: DMatrix<f64>,
    residual: f64,
    rank: usize,
    /// Row-scaled equalities `a y = b` and the pseudo-inverse of `a`.
    a: DMatrix<f64>,
    b: DVector<f64>,
    pinv: DMatrix<f64>,
}

fn eliminate(problem: &SdpProblem) -> Elimination {
    let m = problem.num_vars;
    let p = problem.equalities.len();
    if p == 0 {
        return Elimination {
            y0: DVector::zeros(m),
            basis: DMatrix::identity(m, m),
            residual: 0.0,
            rank: 0,
            a: DMatrix::zeros(0, m),
            b: DVector::zeros(0),
            pinv: DMatrix::zeros(m, 0),
        };
    }
    let mut a = DMatrix::zeros(p, m);
    let mut b = DVector::zeros(p);
    for (i, eq) in problem.equalities.iter().enumerate() {
        for &(v, c) in &eq.coeffs {
            a[(i, v)] += c;
        }
        b[i] = eq.rhs;
    }
    // Unit-scale rows so the rank threshold is not dominated by one row.
    for i in 0..p {
        let s = a.row(i).amax();
        if s > 0.0 {
            a.row_mut(i).scale_mut(1.0 / s);
            b[i] /= s;
        }
    }
    // Row space of A from the thin SVD of A'.
    let svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn> = SVD::new(a.transpose(), true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v requested");
    let sv = &svd.singular_values;
    let smax = sv.max().max(1e-300);
    let thresh = 1e-11 * smax * (m.max(p) as f64);
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > thresh).collect();
    let rank = keep.len();
    // y0 = A^+ b = U_r S_r^{-1} V_r' b
    let mut pinv = DMatrix::zeros(m, p);
    for &i in &keep {
        pinv += u.column(i) * (v_t.row(i) / sv[i]);
    }
    let y0 = &pinv * &b;
    let residual = (&a * &y0 - &b).amax();
    let basis = if rank == 0 {
        DMatrix::identity(m, m)
    } else if rank == m {
        DMatrix::zeros(m, 0)
    } else {
        // Eigenvectors of A'A for the m - rank smallest eigenvalues.
        let eig = SymmetricEigen::new(a.tr_mul(&a));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut basis = eig.eigenvectors.select_columns(order[..m - rank].iter());
        // A'A squares small singular values; project out the SVD row space
        // (accurate to the singular gap) and re-orthonormalize.
        let row_space = u.select_columns(keep.iter());
        for _ in 0..2 {
            basis -= &row_space * row_space.tr_mul(&basis);
            basis = basis.qr().q();
        }
        basis
    };
    Elimination {
        y0,
        basis,
        residual,
        rank,
        a,
        b,
        pinv,
    }
}

struct Compiled {
    conic: ConicProblem,
    /// `y = y_offset + transform x`
    y_offset: DVector<f64>,
    transform: DMatrix<f64>,
    eq_a: DMatrix<f64>,
    eq_b: DVector<f64>,
    eq_pinv: DMatrix<f64>,
    lp_blocks: Vec<usize>,
    psd_blocks: Vec<usize>,
}

enum Prepared {
    Ready(Compiled),
    Inconsistent,
    Unbounded(DVector<f64>),
}

fn prepare(problem: &SdpProblem, tol: f64) -> Prepared {
    let elim = eliminate(problem);
    let bnorm = problem.equalities.iter().fold(1.0f64, |a, e| a.max(e.rhs.abs()));
    if elim.residual > tol * bnorm * 10.0 {
        return Prepared::Inconsistent;
    }
    log::debug!(
        "sdp: {} vars, {} equalities (rank {}), {} blocks",
        problem.num_vars,
        problem.equalities.len(),
        elim.rank,
        problem.blocks.len()
    );

    let lp_blocks: Vec<usize> = (0..problem.blocks.len())
        .filter(|&j| problem.blocks[j].size == 1)
        .collect();
    let psd_blocks: Vec<usize> = (0..problem.blocks.len())
        .filter(|&j| problem.blocks[j].size > 1)
        .collect();
    let sizes: Vec<usize> = psd_blocks.iter().map(|&j| problem.blocks[j].size).collect();
    let layout = Layout::new(lp_blocks.len(), &sizes);

    // Sparse rows of the map y -> vec(F(y)) - vec(C), and h = vec(F(y0)).
    let m = problem.num_vars;
    let y0 = elim.y0.as_slice();
    let mut h = DVector::zeros(layout.total);
    let mut entries: Vec<(usize, usize, f64)> = Vec::new(); // (row, var, coef)
    let mut push = |row_idx: &[usize], block: &LmiBlock, h: &mut DVector<f64>| {
        for &(r, c, v) in &block.constant {
            for &ri in row_idx_of(row_idx, block.size, r, c).iter().flatten() {
                h[ri] += v;
            }
        }
        for &(var, r, c, a) in &block.coeffs {
            for &ri in row_idx_of(row_idx, block.size, r, c).iter().flatten() {
                h[ri] += a * y0[var];
                entries.push((ri, var, a));
            }
        }
    };
    for (i, &j) in lp_blocks.iter().enumerate() {
        push(&[i], &problem.blocks[j], &mut h);
    }
    for (b, &j) in psd_blocks.iter().enumerate() {
        let (off, _) = layout.psd[b];
        push(&[off], &problem.blocks[j], &mut h);
    }

    // G_y (total x m) sparse times N (m x k): G = -G_y N
    let n = &elim.basis;
    let k = n.ncols();
    let mut gw = DMatrix::zeros(layout.total, k);
    for &(row, var, a) in &entries {
        for j in 0..k {
            gw[(row, j)] -= a * n[(var, j)];
        }
    }
    let c_y = DVector::from_column_slice(&problem.objective);
    let c_w = n.tr_mul(&c_y);

    // Restrict to the column space of G; directions G cannot see must not
    // lower the objective.
    let (transform, c_x, g_x) = if k == 0 {
        (n.clone(), c_w, gw)
    } else {
        let gtg = gw.tr_mul(&gw);
        let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(gtg);
        let emax = eig.eigenvalues.max().max(0.0);
        let thresh = 1e-12 * emax.max(1e-300) * k as f64;
        let range: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > thresh).collect();
        let null: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] <= thresh).collect();
        let p_range = eig.eigenvectors.select_columns(range.iter());
        if !null.is_empty() {
            let p_null = eig.eigenvectors.select_columns(null.iter());
            let c_null = p_null.tr_mul(&c_w);
            if c_null.norm() > tol * c_w.norm().max(1.0) {
                let ray = -(n * (&p_null * c_null));
                return Prepared::Unbounded(ray);
            }
        }
        let c_x = p_range.tr_mul(&c_w);
        let g_x = &gw * &p_range;
        (n * p_range, c_x, g_x)
    };
    let _ = m;
    Prepared::Ready(Compiled {
        conic: ConicProblem {
            c: c_x,
            g: g_x,
            h,
            layout,
        },
        y_offset: elim.y0,
        transform,
        eq_a: elim.a,
        eq_b: elim.b,
        eq_pinv: elim.pinv,
        lp_blocks,
        psd_blocks,
    })
}

// Flat row indices for a lower-triangle entry (both mirror positions for
// off-diagonal entries of a PSD block).
fn row_idx_of(base: &[usize], size: usize, r: usize, c: usize) -> [Option<usize>; 2] {
    let off = base[0];
    if size == 1 {
        return [Some(off), None];
    }
    if r == c {
        [Some(off + c * size + r), None]
    } else {
        [Some(off + c * size + r), Some(off + r * size + c)]
    }
}

/// Solves the problem; status semantics follow [`SolveStatus`]. Feasibility of
/// the returned point is re-checked from the raw block data.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    if !(opts.tol > 0.0 && opts.tol < 1.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput(
            "tol must be in (0, 1) and max_iter positive".into(),
        ));
    }
    let compiled = match prepare(problem, opts.tol) {
        Prepared::Ready(c) => c,
        Prepared::Inconsistent => {
            return Ok(finish(
                problem,
                SolveStatus::Infeasible,
                vec![0.0; problem.num_vars],
                0,
                None,
            ));
        }
        Prepared::Unbounded(ray) => {
            let mut sol = finish(problem, SolveStatus::Unbounded, ray.as_slice().to_vec(), 0, None);
            sol.objective = f64::NEG_INFINITY;
            return Ok(sol);
        }
    };
    // Column equilibration: solve for x' = D^-1 x with unit-norm columns of G.
    let mut scaled = compiled.conic.clone();
    let d: Vec<f64> = (0..scaled.g.ncols())
        .map(|j| {
            let nrm = scaled.g.column(j).norm();
            if nrm > 1e-300 {
                1.0 / nrm
            } else {
                1.0
            }
        })
        .collect();
    for (j, &dj) in d.iter().enumerate() {
        scaled.g.column_mut(j).scale_mut(dj);
        scaled.c[j] *= dj;
    }
    let mut res = ipm::solve(&scaled, opts.tol, opts.max_iter);
    for (j, &dj) in d.iter().enumerate() {
        res.x[j] *= dj;
    }
    log::debug!(
        "ipm finished: {:?} after {} iterations (pres {:.2e}, dres {:.2e}, gap {:.2e})",
        res.status,
        res.iterations,
        res.pres,
        res.dres,
        res.gap
    );
    let mut y = &compiled.y_offset + &compiled.transform * &res.x;
    // Least-norm correction back onto the equalities.
    if compiled.eq_a.nrows() > 0 {
        let r = &compiled.eq_b - &compiled.eq_a * &y;
        y += &compiled.eq_pinv * r;
    }
    // Accept a converged iterate even when the final factorization broke down;
    // the post-check below still guards feasibility.
    let loose = 10.0 * opts.tol;
    let converged = res.pres <= loose && res.dres <= loose && res.gap <= loose * (1.0 + c_abs(&compiled, &res.x));
    let status = match res.status {
        IpmStatus::Optimal => SolveStatus::Optimal,
        IpmStatus::NumericalFailure | IpmStatus::MaxIterations if converged => {
            log::debug!("sdp: accepting reduced-accuracy solution");
            SolveStatus::Optimal
        }
        IpmStatus::PrimalInfeasible => SolveStatus::Infeasible,
        IpmStatus::DualInfeasible => SolveStatus::Unbounded,
        IpmStatus::MaxIterations => SolveStatus::MaxIterations,
        IpmStatus::NumericalFailure => SolveStatus::NumericalFailure,
    };
    let certificate = (status == SolveStatus::Infeasible).then(|| {
        let layout = &compiled.conic.layout;
        let mut out = vec![Vec::new(); problem.blocks.len()];
        for (i, &j) in compiled.lp_blocks.iter().enumerate() {
            out[j] = vec![res.z[i]];
        }
        for (b, &j) in compiled.psd_blocks.iter().enumerate() {
            let (off, n) = layout.psd[b];
            out[j] = res.z.as_slice()[off..off + n * n].to_vec();
        }
        out
    });
    if status == SolveStatus::Unbounded {
        let ray = &compiled.transform * &res.x;
        let mut sol = finish(problem, status, ray.as_slice().to_vec(), res.iterations, None);
        sol.objective = f64::NEG_INFINITY;
        return Ok(sol);
    }
    let mut sol = finish(problem, status, y.as_slice().to_vec(), res.iterations, certificate);
    if sol.status == SolveStatus::Optimal {
        let scale = compiled.conic.h.amax().max(1.0);
        if sol.min_eigenvalue() < -10.0 * opts.tol * scale || sol.equality_residual > 10.0 * opts.tol * scale {
            log::warn!(
                "sdp: post-check failed (min eig {:.3e}, eq residual {:.3e})",
                sol.min_eigenvalue(),
                sol.equality_residual
            );
            sol.status = SolveStatus::NumericalFailure;
        }
    }
    Ok(sol)
}

fn c_abs(compiled: &Compiled, x: &DVector<f64>) -> f64 {
    compiled.conic.c.dot(x).abs()
}

fn finish(
    problem: &SdpProblem,
    status: SolveStatus,
    y: Vec<f64>,
    iterations: usize,
    certificate: Option<Vec<Vec<f64>>>,
) -> SdpSolution {
    let block_min_eigenvalues = problem
        .blocks
        .iter()
        .map(|b| {
            let m = b.evaluate(&y);
            SymmetricEigen::new(m).eigenvalues.min()
        })
        .collect();
    let equality_residual = problem
        .equalities
        .iter()
        .map(|e| (e.coeffs.iter().map(|&(v, a)| a * y[v]).sum::<f64>() - e.rhs).abs())
        .fold(0.0, f64::max);
    SdpSolution {
        status,
        objective: problem.objective_value(&y),
        primal: y,
        block_min_eigenvalues,
        equality_residual,
        iterations,
        certificate,
    }
}
