//! Writes JSON dumps of small Gram SDPs for cross-checking with an external
//! solver (see scripts/solve_dump.py).

use certds::poly::{Monomial, Polynomial};
use certds::sos::{AffinePoly, CoefficientSpace};

fn poly(dim: usize, terms: &[(&[u32], f64)]) -> Polynomial {
    Polynomial::from_terms(dim, terms.iter().map(|(e, c)| (Monomial::new(e.to_vec()), *c))).unwrap()
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| ".".into());

    // maximize g s.t. x^4 - 3x^2 + 1 - g is SOS; optimum g = -5/4.
    let mut s = CoefficientSpace::new(1);
    s.add_free_poly("g", vec![Monomial::one(1)]).unwrap();
    let g = s.poly("g", 0).unwrap().clone();
    let p = poly(1, &[(&[4], 1.0), (&[2], -3.0), (&[0], 1.0)]);
    s.add_sos_constraint("p", &AffinePoly::from_polynomial(&p).sub(&g).unwrap())
        .unwrap();
    let v = s.block("g").unwrap().vars.start;
    s.problem_mut().objective[v] = -1.0;
    std::fs::write(format!("{dir}/gram_lower_bound.json"), s.problem().to_json()).unwrap();

    for (name, p) in [
        ("gram_quartic_plus_one", poly(2, &[(&[4, 0], 1.0), (&[0, 0], 1.0)])),
        (
            "gram_motzkin",
            poly(2, &[(&[4, 2], 1.0), (&[2, 4], 1.0), (&[2, 2], -3.0), (&[0, 0], 1.0)]),
        ),
    ] {
        let mut s = CoefficientSpace::new(2);
        s.add_sos_constraint(name, &AffinePoly::from_polynomial(&p)).unwrap();
        std::fs::write(format!("{dir}/{name}.json"), s.problem().to_json()).unwrap();
    }
}
