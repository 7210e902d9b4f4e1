//! Homogeneous self-dual interior-point method for
//!
//! ```text
//! minimize    c' x
//! subject to  G x + s = h,   s in K = R^p_+ x S^{n_1}_+ x ... x S^{n_q}_+
//! ```
//!
//! with Nesterov-Todd scaling and a Mehrotra predictor-corrector. Cone
//! vectors are stored flat: the `p` nonnegative entries first, then each
//! semidefinite block as its full column-major `n_i * n_i` matrix, so the
//! Euclidean dot product equals the trace inner product.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub lp: usize,
    pub psd: Vec<(usize, usize)>, // (offset, size)
    pub total: usize,
    pub degree: usize,
}

impl Layout {
    pub fn new(lp: usize, sizes: &[usize]) -> Self {
        let mut offset = lp;
        let mut psd = Vec::with_capacity(sizes.len());
        for &s in sizes {
            psd.push((offset, s));
            offset += s * s;
        }
        Self {
            lp,
            psd,
            total: offset,
            degree: lp + sizes.iter().sum::<usize>(),
        }
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.total);
        e.rows_mut(0, self.lp).fill(1.0);
        for &(off, n) in &self.psd {
            for i in 0..n {
                e[off + i * n + i] = 1.0;
            }
        }
        e
    }
}

pub(crate) fn block_matrix(v: &DVector<f64>, off: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, &v.as_slice()[off..off + n * n])
}

fn put_block(v: &mut DVector<f64>, off: usize, m: &DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            // symmetrize on write
            v[off + j * n + i] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ConicProblem {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub layout: Layout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub x: DVector<f64>,
    /// Dual variable, normalized to `h'z = -1` when `status` is `PrimalInfeasible`.
    pub z: DVector<f64>,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
}

/// NT scaling at the current iterate.
struct Scaling {
    w: DVector<f64>,
    r: Vec<DMatrix<f64>>,
    rinv: Vec<DMatrix<f64>>,
    /// Scaled point: nonnegative part then the eigenvalues of each block.
    lambda_lp: DVector<f64>,
    lambda_psd: Vec<DVector<f64>>,
}

impl Scaling {
    fn compute(layout: &Layout, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let p = layout.lp;
        let mut w = DVector::zeros(p);
        let mut lambda_lp = DVector::zeros(p);
        for i in 0..p {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            w[i] = (s[i] / z[i]).sqrt();
            lambda_lp[i] = (s[i] * z[i]).sqrt();
        }
        let mut r = Vec::with_capacity(layout.psd.len());
        let mut rinv = Vec::with_capacity(layout.psd.len());
        let mut lambda_psd = Vec::with_capacity(layout.psd.len());
        for &(off, n) in &layout.psd {
            let sm = block_matrix(s, off, n);
            let zm = block_matrix(z, off, n);
            let l1 = Cholesky::new(sm)?.unpack();
            let l2 = Cholesky::new(zm)?.unpack();
            let prod = l2.transpose() * &l1;
            let svd = SVD::new(prod, true, true);
            let u = svd.u?;
            let vt = svd.v_t?;
            let lam = svd.singular_values;
            if lam.iter().any(|&l| !(l > 0.0)) {
                return None;
            }
            let inv_sqrt = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
            // r = L1 V diag(lam)^(-1/2),  r^{-1} = diag(lam)^(-1/2) U' L2'
            let rb = &l1 * vt.transpose() * &inv_sqrt;
            let rib = &inv_sqrt * u.transpose() * l2.transpose();
            r.push(rb);
            rinv.push(rib);
            lambda_psd.push(lam);
        }
        Some(Self {
            w,
            r,
            rinv,
            lambda_lp,
            lambda_psd,
        })
    }

    /// `W^{-T} u`
    fn wit(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(layout.total);
        for i in 0..layout.lp {
            out[i] = u[i] / self.w[i];
        }
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            let m = block_matrix(u, off, n);
            let t = &self.rinv[b] * m * self.rinv[b].transpose();
            put_block(&mut out, off, &t);
        }
        out
    }

    /// `W^T u`
    fn wt(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(layout.total);
        for i in 0..layout.lp {
            out[i] = u[i] * self.w[i];
        }
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            let m = block_matrix(u, off, n);
            let t = &self.r[b] * m * self.r[b].transpose();
            put_block(&mut out, off, &t);
        }
        out
    }

    /// `W^{-1} u`
    fn winv(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(layout.total);
        for i in 0..layout.lp {
            out[i] = u[i] / self.w[i];
        }
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            let m = block_matrix(u, off, n);
            let t = self.rinv[b].transpose() * m * &self.rinv[b];
            put_block(&mut out, off, &t);
        }
        out
    }

    /// Scaled `G`, i.e. `W^{-T}` applied to every column.
    fn scale_columns(&self, layout: &Layout, g: &DMatrix<f64>) -> DMatrix<f64> {
        let k = g.ncols();
        let mut out = DMatrix::zeros(layout.total, k);
        for i in 0..layout.lp {
            let inv = 1.0 / self.w[i];
            for j in 0..k {
                out[(i, j)] = g[(i, j)] * inv;
            }
        }
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            let rinv = &self.rinv[b];
            let rinv_t = rinv.transpose();
            for j in 0..k {
                let col = g.column(j);
                let m = DMatrix::from_column_slice(n, n, &col.as_slice()[off..off + n * n]);
                let t = rinv * m * &rinv_t;
                let mut dst = out.column_mut(j);
                for c in 0..n {
                    for r in 0..n {
                        dst[off + c * n + r] = 0.5 * (t[(r, c)] + t[(c, r)]);
                    }
                }
            }
        }
        out
    }

    fn lambda_vec(&self, layout: &Layout) -> DVector<f64> {
        let mut out = DVector::zeros(layout.total);
        out.rows_mut(0, layout.lp).copy_from(&self.lambda_lp);
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            for i in 0..n {
                out[off + i * n + i] = self.lambda_psd[b][i];
            }
        }
        out
    }

    /// Solves `lambda o X = r` for `X`.
    fn lambda_inv_apply(&self, layout: &Layout, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(layout.total);
        for i in 0..layout.lp {
            out[i] = r[i] / self.lambda_lp[i];
        }
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            let lam = &self.lambda_psd[b];
            for j in 0..n {
                for i in 0..n {
                    out[off + j * n + i] = 2.0 * r[off + j * n + i] / (lam[i] + lam[j]);
                }
            }
        }
        out
    }

    /// Largest `alpha` with `lambda + alpha * d` in the cone (infinite if unbounded).
    fn max_step(&self, layout: &Layout, d: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..layout.lp {
            if d[i] < 0.0 {
                alpha = alpha.min(-self.lambda_lp[i] / d[i]);
            }
        }
        for (b, &(off, n)) in layout.psd.iter().enumerate() {
            let lam = &self.lambda_psd[b];
            let mut m = block_matrix(d, off, n);
            for j in 0..n {
                for i in 0..n {
                    m[(i, j)] /= (lam[i] * lam[j]).sqrt();
                }
            }
            let m = 0.5 * (&m + m.transpose());
            let min_eig = SymmetricEigen::new(m).eigenvalues.min();
            if min_eig < 0.0 {
                alpha = alpha.min(-1.0 / min_eig);
            }
        }
        alpha
    }
}

/// Jordan product `u o v`.
fn jordan(layout: &Layout, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(layout.total);
    for i in 0..layout.lp {
        out[i] = u[i] * v[i];
    }
    for &(off, n) in &layout.psd {
        let a = block_matrix(u, off, n);
        let b = block_matrix(v, off, n);
        let p = &a * &b;
        let t = 0.5 * (&p + p.transpose());
        put_block(&mut out, off, &t);
    }
    out
}

/// Minimum "eigenvalue" of a cone vector (componentwise for the orthant).
fn cone_min(layout: &Layout, v: &DVector<f64>) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..layout.lp {
        m = m.min(v[i]);
    }
    for &(off, n) in &layout.psd {
        let b = block_matrix(v, off, n);
        let b = 0.5 * (&b + b.transpose());
        m = m.min(SymmetricEigen::new(b).eigenvalues.min());
    }
    m
}

struct Factor {
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl Factor {
    fn new(h: &DMatrix<f64>) -> Option<Self> {
        let k = h.ncols();
        let mut m = h.tr_mul(h);
        let trace: f64 = (0..k).map(|i| m[(i, i)]).sum::<f64>().max(1e-300);
        let mut reg = 0.0;
        for _ in 0..6 {
            let mut mm = m.clone();
            if reg > 0.0 {
                for i in 0..k {
                    mm[(i, i)] += reg;
                }
            }
            if let Some(chol) = Cholesky::new(mm) {
                return Some(Self { chol });
            }
            reg = if reg == 0.0 {
                1e-14 * trace / k as f64
            } else {
                reg * 100.0
            };
        }
        m.fill(0.0);
        None
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }
}

pub(crate) fn solve(prob: &ConicProblem, tol: f64, max_iter: usize) -> IpmResult {
    let layout = &prob.layout;
    let k = prob.c.len();
    let c = &prob.c;
    let g = &prob.g;
    let h = &prob.h;
    let e = layout.identity();
    let resx0 = c.norm().max(1.0);
    let resz0 = h.norm().max(1.0);

    // Initial point from the least-squares problems with identity scaling.
    let (mut x, mut s, mut z) = initial_point(prob, &e);
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut best_merit = f64::INFINITY;
    let mut best = IpmResult {
        status: IpmStatus::MaxIterations,
        x: x.clone(),
        z: z.clone(),
        iterations: 0,
        pres: f64::INFINITY,
        dres: f64::INFINITY,
        gap: f64::INFINITY,
    };

    for it in 0..=max_iter {
        let gx = g * &x;
        let gtz = g.tr_mul(&z);
        let cx = c.dot(&x);
        let hz = h.dot(&z);
        let r_x = &gtz + c * tau;
        let r_z = &s + &gx - h * tau;
        let r_tau = kappa + cx + hz;
        let sz = s.dot(&z);
        let mu = (sz + tau * kappa) / (layout.degree as f64 + 1.0);

        let pres = r_z.norm() / tau / resz0;
        let dres = r_x.norm() / tau / resx0;
        let pcost = cx / tau;
        let dcost = -hz / tau;
        let gap = sz / (tau * tau);
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        let pinfres = if hz < 0.0 {
            gtz.norm() / resx0 / -hz
        } else {
            f64::INFINITY
        };
        let dinfres = if cx < 0.0 {
            (&gx + &s).norm() / resz0 / -cx
        } else {
            f64::INFINITY
        };
        log::trace!(
            "ipm it {it}: pcost {pcost:.6e} dcost {dcost:.6e} gap {gap:.2e} pres {pres:.2e} dres {dres:.2e} tau {tau:.2e} kappa {kappa:.2e}"
        );

        let snapshot = |status| IpmResult {
            status,
            x: &x / tau,
            z: &z / tau,
            iterations: it,
            pres,
            dres,
            gap,
        };

        let merit = pres.max(dres).max(gap.min(relgap));
        if merit < best_merit || best.iterations == 0 {
            best_merit = merit;
            best = snapshot(IpmStatus::MaxIterations);
        }

        if pres <= tol && dres <= tol && (gap <= tol || relgap <= tol) {
            return snapshot(IpmStatus::Optimal);
        }
        if pinfres <= tol {
            let mut r = snapshot(IpmStatus::PrimalInfeasible);
            r.z = &z / -hz;
            r.x = DVector::zeros(k);
            return r;
        }
        if dinfres <= tol {
            let mut r = snapshot(IpmStatus::DualInfeasible);
            r.x = &x / -cx;
            return r;
        }
        if it == max_iter {
            break;
        }

        let Some(sc) = Scaling::compute(layout, &s, &z) else {
            log::debug!("ipm: scaling failed at iteration {it}");
            best.status = IpmStatus::NumericalFailure;
            best.iterations = it;
            return best;
        };
        let hs = sc.scale_columns(layout, g);
        let Some(fac) = Factor::new(&hs) else {
            log::debug!("ipm: factorization failed at iteration {it}");
            best.status = IpmStatus::NumericalFailure;
            best.iterations = it;
            return best;
        };
        let lambda = sc.lambda_vec(layout);
        let lambda_sq = jordan(layout, &lambda, &lambda);
        let h_t = sc.wit(layout, h);
        let rz_t = sc.wit(layout, &r_z);

        // K(a, b): M u = a + Hs' b~,  v~ = Hs u - b~  (b~ already scaled)
        let kkt = |a: &DVector<f64>, b_t: &DVector<f64>| {
            let rhs = a + hs.tr_mul(b_t);
            let u = fac.solve(&rhs);
            let v = &hs * &u - b_t;
            (u, v)
        };
        let (u1, v1) = kkt(&(-c), &h_t);
        let denom = -(v1.norm_squared() + kappa / tau);

        let direction = |r_s: &DVector<f64>, r_kappa: f64| {
            let ls = sc.lambda_inv_apply(layout, r_s);
            let b0 = -&rz_t - &ls;
            let (u0, v0) = kkt(&(-&r_x), &b0);
            let rhs3 = -r_tau - r_kappa / tau;
            let dtau = (rhs3 - c.dot(&u0) - h_t.dot(&v0)) / denom;
            let dx = &u0 + &u1 * dtau;
            let dz_t = &v0 + &v1 * dtau;
            let ds_t = &ls - &dz_t;
            let dkappa = (r_kappa - kappa * dtau) / tau;
            (dx, ds_t, dz_t, dtau, dkappa)
        };

        let step_len = |ds_t: &DVector<f64>, dz_t: &DVector<f64>, dtau: f64, dkappa: f64| {
            let mut a = sc.max_step(layout, ds_t).min(sc.max_step(layout, dz_t));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // predictor
        let (_, ds_a, dz_a, dtau_a, dkappa_a) = direction(&(-&lambda_sq), -tau * kappa);
        let alpha_a = step_len(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).clamp(0.0, 1.0).powi(3);

        // corrector
        let r_s = -&lambda_sq - jordan(layout, &ds_a, &dz_a) + &e * (sigma * mu);
        let r_kappa = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let (dx, ds_t, dz_t, dtau, dkappa) = direction(&r_s, r_kappa);
        let alpha = (0.99 * step_len(&ds_t, &dz_t, dtau, dkappa)).min(1.0);

        if !alpha.is_finite() || alpha <= 0.0 || dx.iter().any(|v| !v.is_finite()) {
            log::debug!("ipm: invalid step at iteration {it}");
            best.status = IpmStatus::NumericalFailure;
            best.iterations = it;
            return best;
        }

        x += &dx * alpha;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        s = sc.wt(layout, &(&lambda + &ds_t * alpha));
        z = sc.winv(layout, &(&lambda + &dz_t * alpha));
    }
    best.iterations = max_iter;
    best
}

fn initial_point(prob: &ConicProblem, e: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let layout = &prob.layout;
    let k = prob.c.len();
    let (x, zc) = match Factor::new(&prob.g) {
        Some(f) if k > 0 => {
            // x = argmin ||G x - h||,  z = argmin ||z|| s.t. G'z + c = 0
            let x = f.solve(&prob.g.tr_mul(&prob.h));
            let z = -(&prob.g * f.solve(&prob.c));
            (x, z)
        }
        _ => (DVector::zeros(k), DVector::zeros(layout.total)),
    };
    let mut s = &prob.h - &prob.g * &x;
    let mut z = zc;
    for v in [&mut s, &mut z] {
        let nrm = v.norm().max(1.0);
        let t = -cone_min(layout, v);
        if t >= -1e-8 * nrm {
            *v += e * (1.0 + t);
        }
    }
    (x, s, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_problem(c: &[f64], g: &[&[f64]], h: &[f64]) -> ConicProblem {
        let rows = g.len();
        let k = c.len();
        let mut gm = DMatrix::zeros(rows, k);
        for (i, r) in g.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                gm[(i, j)] = *v;
            }
        }
        ConicProblem {
            c: DVector::from_column_slice(c),
            g: gm,
            h: DVector::from_column_slice(h),
            layout: Layout::new(rows, &[]),
        }
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + y <= 1, x >= 0, y >= 0
        let p = lp_problem(
            &[-1.0, -2.0],
            &[&[1.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]],
            &[1.0, 0.0, 0.0],
        );
        let r = solve(&p, 1e-9, 100);
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!((r.x[0]).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn infeasible_lp() {
        // x <= -1 and x >= 0
        let p = lp_problem(&[0.0], &[&[1.0], &[-1.0]], &[-1.0, 0.0]);
        let r = solve(&p, 1e-8, 100);
        assert_eq!(r.status, IpmStatus::PrimalInfeasible);
    }

    #[test]
    fn unbounded_lp() {
        // min x s.t. x <= 1
        let p = lp_problem(&[1.0], &[&[1.0]], &[1.0]);
        let r = solve(&p, 1e-8, 100);
        assert_eq!(r.status, IpmStatus::DualInfeasible);
    }

    #[test]
    fn two_by_two_psd() {
        // min t s.t. [[t, 1], [1, t]] >= 0  ->  h - G t with h = [[0,1],[1,0]], G = -I
        let layout = Layout::new(0, &[2]);
        let h = DVector::from_column_slice(&[0.0, 1.0, 1.0, 0.0]);
        let g = DMatrix::from_column_slice(4, 1, &[-1.0, 0.0, 0.0, -1.0]);
        let p = ConicProblem {
            c: DVector::from_column_slice(&[1.0]),
            g,
            h,
            layout,
        };
        let r = solve(&p, 1e-9, 100);
        assert_eq!(r.status, IpmStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-7, "{}", r.x[0]);
    }
}
