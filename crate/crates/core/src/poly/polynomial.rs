use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::monomial::{binomial, Monomial};
use crate::error::{Error, Result};

/// Sparse multivariate polynomial with `f64` coefficients.
///
/// Terms are kept in canonical form: no stored zero coefficients, every
/// monomial of dimension `dim`, iteration in graded-lex order.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialJson", into = "PolynomialJson")]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(Monomial::one(dim), c);
        p
    }

    /// The coordinate polynomial `x_k` (zero-based `k`).
    pub fn var(dim: usize, k: usize) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(Monomial::var(dim, k), 1.0);
        p
    }

    /// `||x||^2 = x_1^2 + ... + x_n^2`.
    pub fn norm_squared(dim: usize) -> Self {
        let mut p = Self::zero(dim);
        for k in 0..dim {
            let mut e = vec![0; dim];
            e[k] = 2;
            p.add_term(Monomial::new(e), 1.0);
        }
        p
    }

    /// Builds a polynomial from `(monomial, coefficient)` pairs, summing duplicates.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut p = Self::zero(dim);
        for (m, c) in terms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Lowest total degree among stored terms (0 for the zero polynomial).
    pub fn min_degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    /// Adds `c * m` in place, keeping the canonical form.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.dim(), self.dim);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other.dim)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other.dim)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.dim);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other.dim)?;
        let mut out = Polynomial::zero(self.dim);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.dim, 1.0);
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.eval(x))
    }

    /// Unchecked evaluation for hot loops; `x.len()` must equal `dim`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.terms.iter().map(|(m, &c)| c * m.evaluate(x)).sum()
    }

    /// Partial derivative with respect to `x_k`.
    pub fn partial(&self, k: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.dim);
        for (m, &c) in &self.terms {
            if let Some((f, d)) = m.derivative(k) {
                out.add_term(d, c * f);
            }
        }
        out
    }

    pub fn gradient(&self) -> super::PolynomialVector {
        super::PolynomialVector::new_unchecked((0..self.dim).map(|k| self.partial(k)).collect())
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: usize) -> Polynomial {
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    /// Drops terms whose coefficient magnitude is at most `tol`.
    pub fn prune(&self, tol: f64) -> Polynomial {
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Composition with the per-axis affine map: returns `q(x) = p(scale * x + shift)`.
    pub fn affine_substitute(&self, scale: &[f64], shift: &[f64]) -> Result<Polynomial> {
        self.check_dim(scale.len())?;
        self.check_dim(shift.len())?;
        let n = self.dim;
        let mut out = Polynomial::zero(n);
        for (m, &c) in &self.terms {
            let mut term = Polynomial::constant(n, c);
            for (k, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                // (s x + t)^e = sum_j C(e, j) s^j t^(e-j) x^j
                let mut factor = Polynomial::zero(n);
                for j in 0..=e {
                    let coef = binomial(e as usize, j as usize) as f64
                        * scale[k].powi(j as i32)
                        * shift[k].powi((e - j) as i32);
                    let mut exps = vec![0; n];
                    exps[k] = j;
                    factor.add_term(Monomial::new(exps), coef);
                }
                term = &term * &factor;
            }
            for (tm, tc) in term.terms {
                out.add_term(tm, tc);
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            if m.is_constant() {
                write!(f, "{}", c.abs())?;
            } else if c.abs() == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", c.abs())?;
            }
        }
        Ok(())
    }
}

// Operator forms panic on dimension mismatch; use the named methods for
// checked arithmetic on untrusted input.
impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::add(self, rhs).expect("polynomial dimension mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::sub(self, rhs).expect("polynomial dimension mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.multiply(rhs).expect("polynomial dimension mismatch")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialJson {
    dim: usize,
    terms: Vec<TermJson>,
}

impl TryFrom<PolynomialJson> for Polynomial {
    type Error = Error;

    fn try_from(j: PolynomialJson) -> Result<Self> {
        if j.dim == 0 {
            return Err(Error::InvalidInput("polynomial dimension must be positive".into()));
        }
        let mut p = Polynomial::zero(j.dim);
        for t in j.terms {
            if t.exp.len() != j.dim {
                return Err(Error::DimensionMismatch {
                    expected: j.dim,
                    found: t.exp.len(),
                });
            }
            if !t.coef.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
            if t.exp.iter().any(|&e| e > 64) {
                return Err(Error::InvalidInput("exponent exceeds 64".into()));
            }
            p.add_term(Monomial::new(t.exp), t.coef);
        }
        Ok(p)
    }
}

impl From<Polynomial> for PolynomialJson {
    fn from(p: Polynomial) -> Self {
        PolynomialJson {
            dim: p.dim,
            terms: p
                .terms
                .into_iter()
                .map(|(m, coef)| TermJson {
                    exp: m.exponents().to_vec(),
                    coef,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    fn motzkin() -> Polynomial {
        Polynomial::from_terms(
            2,
            [
                (m(&[4, 2]), 1.0),
                (m(&[2, 4]), 1.0),
                (m(&[2, 2]), -3.0),
                (m(&[0, 0]), 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p = Polynomial::from_terms(2, [(m(&[2, 0]), 1.0), (m(&[0, 1]), 2.0)]).unwrap();
        assert_eq!(p.evaluate(&[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(Polynomial::zero(2).evaluate(&[3.0, -7.0]).unwrap(), 0.0);
        // 1 + 1 - 3 + 1
        assert_eq!(motzkin().evaluate(&[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let p = Polynomial::var(2, 0);
        assert!(matches!(
            p.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn gradient_examples() {
        let p = Polynomial::from_terms(2, [(m(&[2, 1]), 1.0)]).unwrap();
        let g = p.gradient();
        assert_eq!(g[0], Polynomial::from_terms(2, [(m(&[1, 1]), 2.0)]).unwrap());
        assert_eq!(g[1], Polynomial::from_terms(2, [(m(&[2, 0]), 1.0)]).unwrap());

        let c = Polynomial::constant(2, 5.0).gradient();
        assert!(c[0].is_zero() && c[1].is_zero());

        let q = Polynomial::norm_squared(2);
        let gq = q.gradient().evaluate(&[1.0, 2.0]).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut xp = [1.0, 2.0];
            let mut xm = [1.0, 2.0];
            xp[k] += h;
            xm[k] -= h;
            let fd = (q.eval(&xp) - q.eval(&xm)) / (2.0 * h);
            assert!((fd - gq[k]).abs() < 1e-8);
        }
        assert_eq!(gq, vec![2.0, 4.0]);
    }

    #[test]
    fn multiply_examples() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let one = Polynomial::constant(2, 1.0);
        let p = &(&x + &one) * &(&x - &one);
        assert_eq!(p, &(&x * &x) - &one);
        assert!((&p * &Polynomial::zero(2)).is_zero());
        let s = &x + &y;
        let sq = s.multiply(&s).unwrap();
        let expect = Polynomial::from_terms(2, [(m(&[2, 0]), 1.0), (m(&[1, 1]), 2.0), (m(&[0, 2]), 1.0)]).unwrap();
        assert_eq!(sq, expect);
        assert_eq!(sq.degree(), 2);
        assert!(x.multiply(&Polynomial::var(3, 0)).is_err());
    }

    #[test]
    fn cancellation_leaves_no_terms() {
        let p = motzkin();
        let z = p.add(&p.scale(-1.0)).unwrap();
        assert_eq!(z.num_terms(), 0);
        assert_eq!(z.degree(), 0);
    }

    #[test]
    fn affine_substitution_matches_direct_evaluation() {
        let p = motzkin();
        let scale = [0.5, -2.0];
        let shift = [1.0, 0.25];
        let q = p.affine_substitute(&scale, &shift).unwrap();
        for x in [[0.3, -0.7], [1.5, 2.0], [-1.0, 0.0]] {
            let y = [scale[0] * x[0] + shift[0], scale[1] * x[1] + shift[1]];
            assert!((q.eval(&x) - p.eval(&y)).abs() < 1e-9);
        }
    }

    #[test]
    fn json_uses_canonical_order() {
        let p = motzkin();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"dim":2,"terms":[{"exp":[0,0],"coef":1.0},{"exp":[2,2],"coef":-3.0},{"exp":[4,2],"coef":1.0},{"exp":[2,4],"coef":1.0}]}"#
        );
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_rejects_bad_dimension() {
        let bad = r#"{"dim":2,"terms":[{"exp":[1],"coef":1.0}]}"#;
        assert!(serde_json::from_str::<Polynomial>(bad).is_err());
    }
}
