//! Symbolic polynomial expressions over named decision blocks, used to find
//! products of free blocks before instantiating an affine constraint.

use std::collections::{BTreeMap, BTreeSet};

use super::affine::AffinePoly;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Reference to component `component` of block `block`, optionally
/// differentiated with respect to `x_{partial}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockRef {
    pub block: String,
    pub component: usize,
    pub partial: Option<usize>,
}

/// `coef(x) * prod(factors)`.
#[derive(Clone, Debug)]
pub struct Term {
    pub coef: Polynomial,
    pub factors: Vec<BlockRef>,
}

#[derive(Clone, Debug)]
pub struct SymExpr {
    dim: usize,
    terms: Vec<Term>,
}

/// Value a block takes at instantiation time.
#[derive(Clone, Debug)]
pub enum Binding {
    Fixed(Vec<Polynomial>),
    Free(Vec<AffinePoly>),
}

impl SymExpr {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn poly(p: &Polynomial) -> Self {
        Self {
            dim: p.dim(),
            terms: vec![Term {
                coef: p.clone(),
                factors: Vec::new(),
            }],
        }
    }

    fn single(dim: usize, r: BlockRef) -> Self {
        Self {
            dim,
            terms: vec![Term {
                coef: Polynomial::constant(dim, 1.0),
                factors: vec![r],
            }],
        }
    }

    pub fn block(dim: usize, name: &str, component: usize) -> Self {
        Self::single(
            dim,
            BlockRef {
                block: name.to_string(),
                component,
                partial: None,
            },
        )
    }

    pub fn partial(dim: usize, name: &str, component: usize, k: usize) -> Self {
        Self::single(
            dim,
            BlockRef {
                block: name.to_string(),
                component,
                partial: Some(k),
            },
        )
    }

    /// `grad(scalar) . vector`, e.g. the derivative of `V` along `f`.
    pub fn lie_derivative(dim: usize, scalar: &str, vector: &str) -> Self {
        let mut out = Self::zero(dim);
        for k in 0..dim {
            out = out.add(&Self::partial(dim, scalar, 0, k).mul(&Self::block(dim, vector, k)));
        }
        out
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn add(&self, other: &SymExpr) -> SymExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        SymExpr { dim: self.dim, terms }
    }

    pub fn scale(&self, s: f64) -> SymExpr {
        SymExpr {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coef: t.coef.scale(s),
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymExpr) -> SymExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &SymExpr) -> SymExpr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                terms.push(Term {
                    coef: &a.coef * &b.coef,
                    factors,
                });
            }
        }
        SymExpr { dim: self.dim, terms }
    }

    pub fn mul_poly(&self, p: &Polynomial) -> SymExpr {
        self.mul(&SymExpr::poly(p))
    }

    /// Replaces every product `B*B` of the undifferentiated scalar block
    /// `name` by its linearization `2 B B0 - B0^2` around `around`.
    pub fn linearize_square(&self, name: &str, around: &Polynomial) -> SymExpr {
        let is_b = |r: &BlockRef| r.block == name && r.partial.is_none() && r.component == 0;
        let mut terms = Vec::new();
        for t in &self.terms {
            let hits: Vec<usize> = (0..t.factors.len()).filter(|&i| is_b(&t.factors[i])).collect();
            if hits.len() < 2 {
                terms.push(t.clone());
                continue;
            }
            let (i, j) = (hits[0], hits[1]);
            let rest: Vec<BlockRef> = t
                .factors
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i && k != j)
                .map(|(_, r)| r.clone())
                .collect();
            let mut lin = rest.clone();
            lin.push(t.factors[i].clone());
            terms.push(Term {
                coef: &t.coef * &around.scale(2.0),
                factors: lin,
            });
            terms.push(Term {
                coef: -&(&t.coef * &(around * around)),
                factors: rest,
            });
        }
        SymExpr { dim: self.dim, terms }
    }

    /// Folds fixed blocks into coefficients. Fails with
    /// [`Error::NotAffine`] if a term multiplies two free blocks and with
    /// [`Error::Assembly`] if a block has no binding.
    pub fn instantiate(&self, bindings: &BTreeMap<String, Binding>) -> Result<AffinePoly> {
        let mut out = AffinePoly::zero(self.dim);
        for t in &self.terms {
            let mut coef = t.coef.clone();
            let mut free: Option<AffinePoly> = None;
            for r in &t.factors {
                let b = bindings
                    .get(&r.block)
                    .ok_or_else(|| Error::Assembly(format!("no binding for block `{}`", r.block)))?;
                let missing = || Error::Assembly(format!("block `{}` has no component {}", r.block, r.component));
                match b {
                    Binding::Fixed(v) => {
                        let p = v.get(r.component).ok_or_else(missing)?;
                        let p = match r.partial {
                            Some(k) => p.partial(k),
                            None => p.clone(),
                        };
                        coef = coef.multiply(&p)?;
                    }
                    Binding::Free(v) => {
                        if free.is_some() {
                            return Err(Error::NotAffine(format!(
                                "product of free blocks involving `{}`",
                                r.block
                            )));
                        }
                        let p = v.get(r.component).ok_or_else(missing)?;
                        free = Some(match r.partial {
                            Some(k) => p.partial(k),
                            None => p.clone(),
                        });
                    }
                }
            }
            let term = match free {
                Some(a) => a.mul_poly(&coef)?,
                None => AffinePoly::from_polynomial(&coef),
            };
            out = out.add(&term)?;
        }
        Ok(out)
    }
}

/// Products of decision blocks appearing in an expression.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BilinearReport {
    /// Unordered pairs of distinct blocks multiplied together.
    pub pairs: BTreeSet<(String, String)>,
    /// Blocks multiplied by themselves.
    pub squares: BTreeSet<String>,
}

impl BilinearReport {
    pub fn is_affine(&self) -> bool {
        self.pairs.is_empty() && self.squares.is_empty()
    }
}

/// Reports the block products in `expr`, counting only blocks in `free`.
pub fn bilinear_structure(expr: &SymExpr, free: &BTreeSet<String>) -> BilinearReport {
    let mut rep = BilinearReport::default();
    for t in expr.terms() {
        let names: Vec<&String> = t
            .factors
            .iter()
            .map(|r| &r.block)
            .filter(|b| free.contains(*b))
            .collect();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                if names[i] == names[j] {
                    rep.squares.insert(names[i].clone());
                } else {
                    let (a, b) = if names[i] < names[j] {
                        (names[i], names[j])
                    } else {
                        (names[j], names[i])
                    };
                    rep.pairs.insert((a.clone(), b.clone()));
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;
    use crate::sos::CoefficientSpace;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lie_derivative_pairs_v_and_f() {
        let e = SymExpr::lie_derivative(2, "V", "f");
        let rep = bilinear_structure(&e, &set(&["V", "f"]));
        assert_eq!(rep.pairs, [("V".to_string(), "f".to_string())].into_iter().collect());
        assert!(bilinear_structure(&e, &set(&["f"])).is_affine());
    }

    #[test]
    fn square_is_reported_and_linearized() {
        let b = SymExpr::block(1, "B", 0);
        let e = b.mul(&b).mul(&SymExpr::block(1, "phi", 0));
        let rep = bilinear_structure(&e, &set(&["B"]));
        assert_eq!(rep.squares, set(&["B"]));
        let lin = e.linearize_square("B", &Polynomial::constant(1, 3.0));
        assert!(bilinear_structure(&lin, &set(&["B"])).is_affine());
        // phi*B^2 at B = 3, phi = 1: linearization 2*3*B - 9 is exact at B = 3.
        let mut bind = BTreeMap::new();
        bind.insert("phi".to_string(), Binding::Fixed(vec![Polynomial::constant(1, 1.0)]));
        bind.insert("B".to_string(), Binding::Fixed(vec![Polynomial::constant(1, 3.0)]));
        let v = lin.instantiate(&bind).unwrap().evaluate(&[]);
        assert!((v.eval(&[0.0]) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn instantiate_rejects_free_products_and_unknown_blocks() {
        let mut s = CoefficientSpace::new(1);
        s.add_free_poly("V", vec![Monomial::new(vec![2])]).unwrap();
        s.add_free_vector("f", &[vec![Monomial::new(vec![1])]]).unwrap();
        let e = SymExpr::lie_derivative(1, "V", "f");
        let mut bind = BTreeMap::new();
        bind.insert("V".to_string(), s.free_binding("V").unwrap());
        bind.insert("f".to_string(), s.free_binding("f").unwrap());
        assert!(matches!(e.instantiate(&bind), Err(Error::NotAffine(_))));
        bind.remove("V");
        assert!(matches!(e.instantiate(&bind), Err(Error::Assembly(_))));
        bind.insert("V".to_string(), Binding::Fixed(vec![Polynomial::var(1, 0).pow(2)]));
        // dV/dx * f = 2x * (a x) = 2a x^2
        let a = e.instantiate(&bind).unwrap();
        let y: Vec<f64> = vec![0.0, 0.5];
        assert!((a.evaluate(&y).coefficient(&Monomial::new(vec![2])) - 1.0).abs() < 1e-12);
    }
}
