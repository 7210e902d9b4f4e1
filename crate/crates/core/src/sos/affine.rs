use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};

/// Scalar affine function `constant + sum_v coeffs[v] * y_v` of the decision vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineForm {
    pub constant: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl AffineForm {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn var(v: usize, a: f64) -> Self {
        let mut f = Self::default();
        f.add_var(v, a);
        f
    }

    pub fn add_var(&mut self, v: usize, a: f64) {
        if a == 0.0 {
            return;
        }
        let e = self.coeffs.entry(v).or_insert(0.0);
        *e += a;
        if *e == 0.0 {
            self.coeffs.remove(&v);
        }
    }

    pub fn add_scaled(&mut self, other: &AffineForm, s: f64) {
        self.constant += s * other.constant;
        for (&v, &a) in &other.coeffs {
            self.add_var(v, s * a);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|(&v, &a)| a * y[v]).sum::<f64>()
    }

    pub fn terms(&self) -> Vec<(usize, f64)> {
        self.coeffs.iter().map(|(&v, &a)| (v, a)).collect()
    }
}

/// Polynomial whose coefficients are affine in the decision vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePoly {
    dim: usize,
    terms: BTreeMap<Monomial, AffineForm>,
}

impl AffinePoly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_polynomial(p: &Polynomial) -> Self {
        let mut out = Self::zero(p.dim());
        for (m, c) in p.terms() {
            out.add_term(m.clone(), &AffineForm::constant(c), 1.0);
        }
        out
    }

    /// Free polynomial `sum_i y_{vars[i]} * monomials[i]`.
    pub fn from_vars(dim: usize, monomials: &[Monomial], vars: &[usize]) -> Self {
        let mut out = Self::zero(dim);
        for (m, &v) in monomials.iter().zip(vars) {
            out.add_term(m.clone(), &AffineForm::var(v, 1.0), 1.0);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &AffineForm)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&AffineForm> {
        self.terms.get(m)
    }

    pub fn add_term(&mut self, m: Monomial, f: &AffineForm, s: f64) {
        let e = self.terms.entry(m.clone()).or_default();
        e.add_scaled(f, s);
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    /// Highest total degree with a nonzero coefficient form.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn add(&self, other: &AffinePoly) -> Result<AffinePoly> {
        self.check(other.dim)?;
        let mut out = self.clone();
        for (m, f) in &other.terms {
            out.add_term(m.clone(), f, 1.0);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &AffinePoly) -> Result<AffinePoly> {
        self.check(other.dim)?;
        let mut out = self.clone();
        for (m, f) in &other.terms {
            out.add_term(m.clone(), f, -1.0);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> AffinePoly {
        let mut out = AffinePoly::zero(self.dim);
        for (m, f) in &self.terms {
            out.add_term(m.clone(), f, s);
        }
        out
    }

    pub fn mul_poly(&self, p: &Polynomial) -> Result<AffinePoly> {
        self.check(p.dim())?;
        let mut out = AffinePoly::zero(self.dim);
        for (ma, f) in &self.terms {
            for (mb, c) in p.terms() {
                out.add_term(ma.mul(mb), f, c);
            }
        }
        Ok(out)
    }

    pub fn partial(&self, k: usize) -> AffinePoly {
        let mut out = AffinePoly::zero(self.dim);
        for (m, f) in &self.terms {
            if let Some((c, d)) = m.derivative(k) {
                out.add_term(d, f, c);
            }
        }
        out
    }

    /// Affine form of the value at the point `x`.
    pub fn at_point(&self, x: &[f64]) -> Result<AffineForm> {
        self.check(x.len())?;
        let mut out = AffineForm::default();
        for (m, f) in &self.terms {
            out.add_scaled(f, m.evaluate(x));
        }
        Ok(out)
    }

    /// The polynomial obtained by fixing the decision vector to `y`.
    pub fn evaluate(&self, y: &[f64]) -> Polynomial {
        let mut p = Polynomial::zero(self.dim);
        for (m, f) in &self.terms {
            p.add_term(m.clone(), f.evaluate(y));
        }
        p
    }

    /// Decision variables referenced by any coefficient.
    pub fn vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.values().flat_map(|f| f.coeffs.keys().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn check(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other,
            });
        }
        Ok(())
    }
}
