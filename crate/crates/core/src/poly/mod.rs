//! Sparse multivariate polynomials over `f64`.

mod monomial;
mod polynomial;

use std::ops::Index;

use serde::{Deserialize, Serialize};

pub use monomial::{binomial, monomial_basis, monomial_range, Monomial};
pub use polynomial::Polynomial;

use crate::error::{Error, Result};

/// Ordered list of polynomials sharing one ambient dimension, e.g. a vector
/// field `f: R^n -> R^n` or a gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Polynomial>", into = "Vec<Polynomial>")]
pub struct PolynomialVector {
    components: Vec<Polynomial>,
}

impl PolynomialVector {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        if let Some(first) = components.first() {
            let n = first.dim();
            if let Some(bad) = components.iter().find(|p| p.dim() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: bad.dim(),
                });
            }
        }
        Ok(Self { components })
    }

    pub(crate) fn new_unchecked(components: Vec<Polynomial>) -> Self {
        Self { components }
    }

    pub fn zero(dim: usize, len: usize) -> Self {
        Self {
            components: vec![Polynomial::zero(dim); len],
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Ambient dimension of the components (0 when empty).
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, Polynomial::dim)
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Polynomial> {
        self.components.iter()
    }

    pub fn degree(&self) -> usize {
        self.components.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|p| p.evaluate(x)).collect()
    }

    /// Unchecked evaluation into a caller-provided buffer.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.components) {
            *o = p.eval(x);
        }
    }

    /// Polynomial inner product `sum_k self_k * other_k`.
    pub fn dot(&self, other: &PolynomialVector) -> Result<Polynomial> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let mut acc = Polynomial::zero(self.dim().max(other.dim()));
        for (a, b) in self.components.iter().zip(&other.components) {
            acc = acc.add(&a.multiply(b)?)?;
        }
        Ok(acc)
    }

    pub fn map<F: Fn(&Polynomial) -> Polynomial>(&self, f: F) -> Self {
        Self {
            components: self.components.iter().map(f).collect(),
        }
    }
}

impl Index<usize> for PolynomialVector {
    type Output = Polynomial;
    fn index(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }
}

impl TryFrom<Vec<Polynomial>> for PolynomialVector {
    type Error = Error;
    fn try_from(v: Vec<Polynomial>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PolynomialVector> for Vec<Polynomial> {
    fn from(v: PolynomialVector) -> Self {
        v.components
    }
}
