use std::cmp::Ordering;
use std::fmt;

/// A monomial `x_1^{e_1} ... x_n^{e_n}` stored as its exponent vector.
///
/// Monomials order graded-lexicographically: lower total degree first, and
/// within one degree the larger exponent of `x_1` first (`x1^2 < x1*x2 < x2^2`).
/// Every Gram index in the crate relies on this order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn one(dim: usize) -> Self {
        Self { exps: vec![0; dim] }
    }

    /// The monomial `x_k`.
    pub fn var(dim: usize, k: usize) -> Self {
        let mut exps = vec![0; dim];
        exps[k] = 1;
        Self { exps }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.dim(), other.dim());
        Monomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }

    /// Derivative with respect to `x_k`: returns the power-rule factor and the
    /// lowered monomial, or `None` when the exponent of `x_k` is zero.
    pub fn derivative(&self, k: usize) -> Option<(f64, Monomial)> {
        let e = self.exps[k];
        if e == 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[k] -= 1;
        Some((e as f64, Monomial { exps }))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (k, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", k + 1)?;
            } else {
                write!(f, "x{}^{}", k + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n` variables of total degree `<= d`, graded-lex ordered.
/// The count is `C(n + d, d)`.
pub fn monomial_basis(n: usize, d: usize) -> Vec<Monomial> {
    monomial_range(n, 0, d)
}

/// Monomials in `n` variables with total degree in `lo..=hi`, graded-lex ordered.
pub fn monomial_range(n: usize, lo: usize, hi: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for deg in lo..=hi {
        homogeneous(n, deg, &mut out);
    }
    out
}

fn homogeneous(n: usize, deg: usize, out: &mut Vec<Monomial>) {
    if n == 0 {
        return;
    }
    let mut exps = vec![0u32; n];
    fill(&mut exps, 0, deg as u32, out);
}

// Emits exponent vectors with the remaining degree distributed over
// positions `pos..`, largest exponent in the earliest position first.
fn fill(exps: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Monomial>) {
    let n = exps.len();
    if pos == n - 1 {
        exps[pos] = remaining;
        out.push(Monomial::new(exps.clone()));
        exps[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e;
        fill(exps, pos + 1, remaining - e, out);
    }
    exps[pos] = 0;
}

/// Binomial coefficient `C(n, k)` as `usize`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_counts() {
        assert_eq!(monomial_basis(2, 1).len(), 3);
        assert_eq!(monomial_basis(2, 2).len(), 6);
        // C(7, 4) = 35
        assert_eq!(monomial_basis(3, 4).len(), binomial(7, 4));
        assert_eq!(binomial(7, 4), 35);
    }

    #[test]
    fn basis_order_is_graded_lex() {
        let b = monomial_basis(2, 2);
        let shown: Vec<String> = b.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
        let mut sorted = b.clone();
        sorted.sort();
        assert_eq!(sorted, b);
    }

    #[test]
    fn derivative_lowers_exponent() {
        let m = Monomial::new(vec![2, 1]);
        let (c, d) = m.derivative(0).unwrap();
        assert_eq!(c, 2.0);
        assert_eq!(d, Monomial::new(vec![1, 1]));
        assert!(Monomial::new(vec![0, 3]).derivative(0).is_none());
    }
}
