//! Sum-of-squares constraints compiled to semidefinite programs via Gram
//! matrices and coefficient matching.

mod affine;
mod expr;

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use affine::{AffineForm, AffinePoly};
pub use expr::{bilinear_structure, BilinearReport, Binding, BlockRef, SymExpr, Term};

use crate::error::{Error, Result};
use crate::poly::{monomial_basis, monomial_range, Monomial, Polynomial};
use crate::sdp::{self, Equality, LmiBlock, SdpProblem, SolverOptions};

/// Gram basis for an expression whose nonzero coefficients have degrees in
/// `[lo, hi]`, with `hi` even: monomials of degree `lo/2 ..= hi/2` (rounded
/// down at the bottom). Terms of an SOS decomposition cannot go below half the
/// minimum degree.
pub fn gram_basis(dim: usize, lo: usize, hi: usize) -> Vec<Monomial> {
    monomial_range(dim, lo / 2, hi / 2)
}

/// Handle to a symmetric PSD Gram matrix living in an [`SdpProblem`].
#[derive(Clone, Debug)]
pub struct GramHandle {
    pub basis: Vec<Monomial>,
    pub block: usize,
    /// `(var, row, col)` with `row >= col`.
    pub entries: Vec<(usize, usize, usize)>,
}

impl GramHandle {
    pub fn matrix(&self, y: &[f64]) -> DMatrix<f64> {
        let s = self.basis.len();
        let mut m = DMatrix::zeros(s, s);
        for &(v, r, c) in &self.entries {
            m[(r, c)] = y[v];
            m[(c, r)] = y[v];
        }
        m
    }

    /// `z' G z` as a polynomial affine in the Gram variables.
    fn as_affine(&self, dim: usize) -> AffinePoly {
        let mut p = AffinePoly::zero(dim);
        for &(v, r, c) in &self.entries {
            let w = if r == c { 1.0 } else { 2.0 };
            p.add_term(self.basis[r].mul(&self.basis[c]), &AffineForm::var(v, w), 1.0);
        }
        p
    }
}

/// A named decision block: a vector of polynomials affine in the decision
/// variables, optionally parameterized by a Gram matrix (an SOS multiplier).
#[derive(Clone, Debug)]
pub struct DecisionBlock {
    pub components: Vec<AffinePoly>,
    pub vars: Range<usize>,
    pub gram: Option<GramHandle>,
}

#[derive(Clone, Debug)]
pub struct CompiledSos {
    pub label: String,
    pub gram: GramHandle,
    pub equalities: Range<usize>,
    pub degree: usize,
}

/// Decision vector plus the SDP under construction.
#[derive(Clone, Debug)]
pub struct CoefficientSpace {
    dim: usize,
    problem: SdpProblem,
    blocks: BTreeMap<String, DecisionBlock>,
    constraints: Vec<CompiledSos>,
}

impl CoefficientSpace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            problem: SdpProblem::new(0),
            blocks: BTreeMap::new(),
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vars(&self) -> usize {
        self.problem.num_vars
    }

    pub fn problem(&self) -> &SdpProblem {
        &self.problem
    }

    pub fn problem_mut(&mut self) -> &mut SdpProblem {
        &mut self.problem
    }

    pub fn constraints(&self) -> &[CompiledSos] {
        &self.constraints
    }

    fn insert(&mut self, name: &str, block: DecisionBlock) -> Result<()> {
        if self.blocks.contains_key(name) {
            return Err(Error::Assembly(format!("decision block `{name}` already defined")));
        }
        self.blocks.insert(name.to_string(), block);
        Ok(())
    }

    /// Free polynomial vector; component `k` spans `supports[k]`.
    pub fn add_free_vector(&mut self, name: &str, supports: &[Vec<Monomial>]) -> Result<()> {
        let total: usize = supports.iter().map(Vec::len).sum();
        let vars = self.problem.add_vars(total);
        let mut next = vars.start;
        let mut components = Vec::with_capacity(supports.len());
        for s in supports {
            if s.iter().any(|m| m.dim() != self.dim) {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: s.iter().find(|m| m.dim() != self.dim).map_or(0, Monomial::dim),
                });
            }
            let ids: Vec<usize> = (next..next + s.len()).collect();
            next += s.len();
            components.push(AffinePoly::from_vars(self.dim, s, &ids));
        }
        self.insert(
            name,
            DecisionBlock {
                components,
                vars,
                gram: None,
            },
        )
    }

    pub fn add_free_poly(&mut self, name: &str, support: Vec<Monomial>) -> Result<()> {
        self.add_free_vector(name, &[support])
    }

    fn new_gram(&mut self, basis: Vec<Monomial>) -> Result<GramHandle> {
        let s = basis.len();
        if s == 0 {
            return Err(Error::Assembly("empty Gram basis".into()));
        }
        let vars = self.problem.add_vars(s * (s + 1) / 2);
        let mut lmi = LmiBlock::new(s);
        let mut entries = Vec::with_capacity(vars.len());
        let mut v = vars.start;
        for c in 0..s {
            for r in c..s {
                lmi.add_coeff(v, r, c, 1.0);
                entries.push((v, r, c));
                v += 1;
            }
        }
        self.problem.blocks.push(lmi);
        Ok(GramHandle {
            basis,
            block: self.problem.blocks.len() - 1,
            entries,
        })
    }

    /// SOS polynomial `z(x)' Q z(x)` with `Q >= 0` over the given basis.
    pub fn add_sos_poly(&mut self, name: &str, basis: Vec<Monomial>) -> Result<()> {
        let start = self.problem.num_vars;
        let gram = self.new_gram(basis)?;
        let poly = gram.as_affine(self.dim);
        let end = self.problem.num_vars;
        self.insert(
            name,
            DecisionBlock {
                components: vec![poly],
                vars: start..end,
                gram: Some(gram),
            },
        )
    }

    pub fn block(&self, name: &str) -> Result<&DecisionBlock> {
        self.blocks
            .get(name)
            .ok_or_else(|| Error::Assembly(format!("unknown decision block `{name}`")))
    }

    pub fn poly(&self, name: &str, component: usize) -> Result<&AffinePoly> {
        let b = self.block(name)?;
        b.components
            .get(component)
            .ok_or_else(|| Error::Assembly(format!("block `{name}` has no component {component}")))
    }

    pub fn free_binding(&self, name: &str) -> Result<Binding> {
        Ok(Binding::Free(self.block(name)?.components.clone()))
    }

    /// Value of a block at the decision vector `y`.
    pub fn extract(&self, name: &str, y: &[f64]) -> Result<Vec<Polynomial>> {
        Ok(self.block(name)?.components.iter().map(|p| p.evaluate(y)).collect())
    }

    /// Constrains `expr` to be SOS over the Gram basis derived from its degree
    /// range. Emits one equality per monomial of degree `<= deg(expr)`.
    pub fn add_sos_constraint(&mut self, label: &str, expr: &AffinePoly) -> Result<usize> {
        let deg = expr.degree();
        if deg % 2 == 1 {
            return Err(Error::OddDegree(deg));
        }
        let basis = gram_basis(self.dim, expr.min_degree(), deg);
        self.add_sos_constraint_with_basis(label, expr, basis, deg)
    }

    /// Variant with an explicit Gram basis; coefficients of `expr` above
    /// `2 * deg(basis)` are forced to zero. `degree` bounds the monomials
    /// matched and must be at least `deg(expr)`.
    pub fn add_sos_constraint_with_basis(
        &mut self,
        label: &str,
        expr: &AffinePoly,
        basis: Vec<Monomial>,
        degree: usize,
    ) -> Result<usize> {
        if expr.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: expr.dim(),
            });
        }
        if expr.degree() > degree {
            return Err(Error::Assembly(format!(
                "`{label}`: expression degree {} exceeds bound {degree}",
                expr.degree()
            )));
        }
        if let Some(&v) = expr.vars().last() {
            if v >= self.problem.num_vars {
                return Err(Error::Assembly(format!("`{label}` references unknown variable {v}")));
            }
        }
        let gram = self.new_gram(basis)?;
        let gram_poly = gram.as_affine(self.dim);
        let top = degree.max(gram_poly.degree());
        let start = self.problem.equalities.len();
        for m in monomial_basis(self.dim, top) {
            // gram(m) - expr(m) = 0
            let mut f = gram_poly.coefficient(&m).cloned().unwrap_or_default();
            if let Some(e) = expr.coefficient(&m) {
                f.add_scaled(e, -1.0);
            }
            self.problem.equalities.push(Equality {
                coeffs: f.terms(),
                rhs: -f.constant,
            });
        }
        let end = self.problem.equalities.len();
        self.constraints.push(CompiledSos {
            label: label.to_string(),
            gram,
            equalities: start..end,
            degree: top,
        });
        Ok(self.constraints.len() - 1)
    }

    /// Scalar inequality `form >= 0`.
    pub fn add_nonnegative(&mut self, form: &AffineForm) {
        self.problem.blocks.push(LmiBlock::scalar(form.constant, &form.terms()));
    }

    /// Scalar equality `form == 0`.
    pub fn add_equality(&mut self, form: &AffineForm) {
        self.problem.equalities.push(Equality {
            coeffs: form.terms(),
            rhs: -form.constant,
        });
    }

    pub fn certificate(&self, constraint: usize, y: &[f64]) -> GramCertificate {
        let g = &self.constraints[constraint].gram;
        GramCertificate::new(g.basis.clone(), g.matrix(y))
    }
}

/// Gram certificate `p = z' Q z`, `Q >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramCertificate {
    pub basis: Vec<Vec<u32>>,
    pub matrix: Vec<Vec<f64>>,
}

impl GramCertificate {
    pub fn new(basis: Vec<Monomial>, q: DMatrix<f64>) -> Self {
        Self {
            basis: basis.iter().map(|m| m.exponents().to_vec()).collect(),
            matrix: (0..q.nrows()).map(|r| q.row(r).iter().copied().collect()).collect(),
        }
    }

    fn q(&self) -> DMatrix<f64> {
        let s = self.matrix.len();
        DMatrix::from_fn(s, s, |r, c| 0.5 * (self.matrix[r][c] + self.matrix[c][r]))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.matrix.is_empty() {
            return 0.0;
        }
        let e: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(self.q());
        e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `z(x)' Q z(x)` expanded.
    pub fn reconstruct(&self, dim: usize) -> Polynomial {
        let basis: Vec<Monomial> = self.basis.iter().map(|e| Monomial::new(e.clone())).collect();
        let mut p = Polynomial::zero(dim);
        for (r, br) in basis.iter().enumerate() {
            for (c, bc) in basis.iter().enumerate() {
                p.add_term(br.mul(bc), self.matrix[r][c]);
            }
        }
        p
    }

    /// Largest coefficient mismatch between `p` and the reconstruction.
    pub fn residual(&self, p: &Polynomial) -> f64 {
        match self.reconstruct(p.dim()).sub(p) {
            Ok(d) => d.max_abs_coefficient(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Tolerances accepted for a returned certificate.
pub const CERT_EIG_TOL: f64 = 1e-8;
pub const CERT_COEF_TOL: f64 = 1e-6;

/// Searches for a Gram certificate of the fixed polynomial `p`. Returns
/// `Ok(None)` when the feasibility SDP has no solution or the recovered
/// matrix fails re-verification.
pub fn check_sos(p: &Polynomial) -> Result<Option<GramCertificate>> {
    let deg = p.degree();
    if deg % 2 == 1 {
        return Err(Error::OddDegree(deg));
    }
    let mut space = CoefficientSpace::new(p.dim());
    let idx = space.add_sos_constraint("p", &AffinePoly::from_polynomial(p))?;
    let sol = sdp::solve(space.problem(), &SolverOptions::default())?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let cert = space.certificate(idx, &sol.primal);
    let scale = 1.0 + p.max_abs_coefficient();
    if cert.min_eigenvalue() >= -CERT_EIG_TOL * scale && cert.residual(p) <= CERT_COEF_TOL * scale {
        Ok(Some(cert))
    } else {
        Ok(None)
    }
}
