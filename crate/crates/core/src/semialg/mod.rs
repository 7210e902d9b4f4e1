//! Basic semialgebraic sets `{x : g_i(x) >= 0 for all i}` and constructors
//! for common obstacle and initial-set shapes.

mod polygon;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use polygon::{fit_unsafe_polynomial, ObstacleFit, Polygon2D};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b))
        {
            return Err(Error::InvalidInput("box bounds must be finite with lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[-r, r]^n`.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a < b { rng.gen_range(a..=b) } else { a })
            .collect()
    }

    /// Image under `x -> scale * x + shift` (per axis).
    pub fn map(&self, scale: &[f64], shift: &[f64]) -> BoundingBox {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let a = scale[k] * self.lo[k] + shift[k];
            let b = scale[k] * self.hi[k] + shift[k];
            lo.push(a.min(b));
            hi.push(a.max(b));
        }
        BoundingBox { lo, hi }
    }
}

#[derive(Serialize, Deserialize)]
struct SetJson {
    dim: usize,
    inequalities: Vec<Polynomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundingBox>,
}

/// Conjunction of polynomial inequalities `g_i(x) >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetJson", into = "SetJson")]
pub struct BasicSemialgebraicSet {
    dim: usize,
    inequalities: Vec<Polynomial>,
    /// Optional box known to contain the set; used for sampling members.
    bounds: Option<BoundingBox>,
}

impl TryFrom<SetJson> for BasicSemialgebraicSet {
    type Error = Error;
    fn try_from(j: SetJson) -> Result<Self> {
        let s = Self::new(j.dim, j.inequalities)?;
        match j.bounds {
            Some(b) => s.with_bounds(b),
            None => Ok(s),
        }
    }
}

impl From<BasicSemialgebraicSet> for SetJson {
    fn from(s: BasicSemialgebraicSet) -> Self {
        SetJson {
            dim: s.dim,
            inequalities: s.inequalities,
            bounds: s.bounds,
        }
    }
}

impl BasicSemialgebraicSet {
    pub fn new(dim: usize, inequalities: Vec<Polynomial>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("set dimension must be positive".into()));
        }
        if inequalities.is_empty() {
            return Err(Error::InvalidInput("set needs at least one inequality".into()));
        }
        if let Some(g) = inequalities.iter().find(|g| g.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: g.dim(),
            });
        }
        Ok(Self {
            dim,
            inequalities,
            bounds: None,
        })
    }

    pub fn with_bounds(mut self, b: BoundingBox) -> Result<Self> {
        if b.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: b.dim(),
            });
        }
        self.bounds = Some(b);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> &[Polynomial] {
        &self.inequalities
    }

    pub fn bounds(&self) -> Option<&BoundingBox> {
        self.bounds.as_ref()
    }

    /// Smallest inequality value at `x`; the point is a member iff this is `>= 0`.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        let mut m = f64::INFINITY;
        for g in &self.inequalities {
            m = m.min(g.evaluate(x)?);
        }
        Ok(m)
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.margin(x)? >= 0.0)
    }

    /// Rejection-samples `count` members from the stored bounds, or from
    /// `fallback` if the set has none.
    pub fn sample_members<R: Rng>(
        &self,
        rng: &mut R,
        fallback: &BoundingBox,
        count: usize,
        max_tries: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let region = self.bounds.as_ref().unwrap_or(fallback);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count {
            if tries >= max_tries {
                return Err(Error::Sampling(format!(
                    "found {} of {count} set members after {max_tries} draws",
                    out.len()
                )));
            }
            tries += 1;
            let x = region.sample(rng);
            if self.contains(&x)? {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// The set in coordinates `y` with `x = scale * y + shift`: inequalities
    /// become `g(scale * y + shift)`.
    pub fn pull_back(&self, scale: &[f64], shift: &[f64]) -> Result<Self> {
        let inequalities = self
            .inequalities
            .iter()
            .map(|g| g.affine_substitute(scale, shift))
            .collect::<Result<Vec<_>>>()?;
        let bounds = self.bounds.as_ref().map(|b| {
            let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
            let sh: Vec<f64> = shift.iter().zip(scale).map(|(t, s)| -t / s).collect();
            b.map(&inv, &sh)
        });
        Ok(Self {
            dim: self.dim,
            inequalities,
            bounds,
        })
    }
}

/// `{1 - (x - c)' E (x - c) >= 0}` for the ellipse with the given semi-axes,
/// rotated counter-clockwise by `rotation` radians.
pub fn ellipse_set(center: [f64; 2], semi_axes: [f64; 2], rotation: f64) -> Result<BasicSemialgebraicSet> {
    let [a, b] = semi_axes;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput("ellipse semi-axes must be positive".into()));
    }
    if !center.iter().all(|c| c.is_finite()) || !rotation.is_finite() {
        return Err(Error::InvalidInput("non-finite ellipse parameters".into()));
    }
    let (s, c) = rotation.sin_cos();
    let (ia, ib) = (1.0 / (a * a), 1.0 / (b * b));
    // E = R diag(ia, ib) R'
    let e11 = c * c * ia + s * s * ib;
    let e22 = s * s * ia + c * c * ib;
    let e12 = c * s * (ia - ib);
    let u = &Polynomial::var(2, 0) - &Polynomial::constant(2, center[0]);
    let v = &Polynomial::var(2, 1) - &Polynomial::constant(2, center[1]);
    let q = &(&(&u * &u).scale(e11) + &(&v * &v).scale(e22)) + &(&u * &v).scale(2.0 * e12);
    let g = &Polynomial::constant(2, 1.0) - &q;
    let hx = (a * a * c * c + b * b * s * s).sqrt();
    let hy = (a * a * s * s + b * b * c * c).sqrt();
    BasicSemialgebraicSet::new(2, vec![g])?.with_bounds(BoundingBox {
        lo: vec![center[0] - hx, center[1] - hy],
        hi: vec![center[0] + hx, center[1] + hy],
    })
}

/// `{r^2 - |x - c|^2 >= 0}`.
pub fn ball_set(center: &[f64], radius: f64) -> Result<BasicSemialgebraicSet> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    if center.is_empty() || !center.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidInput(
            "ball center must be a finite non-empty vector".into(),
        ));
    }
    let n = center.len();
    let mut g = Polynomial::constant(n, radius * radius);
    for (k, &ck) in center.iter().enumerate() {
        let d = &Polynomial::var(n, k) - &Polynomial::constant(n, ck);
        g = &g - &(&d * &d);
    }
    BasicSemialgebraicSet::new(n, vec![g])?.with_bounds(BoundingBox {
        lo: center.iter().map(|c| c - radius).collect(),
        hi: center.iter().map(|c| c + radius).collect(),
    })
}

/// Ball around the mean of the given starting points that encloses all of
/// them, enlarged by `padding`.
pub fn initial_set_from_points(starts: &[Vec<f64>], padding: f64) -> Result<BasicSemialgebraicSet> {
    let first = starts
        .first()
        .ok_or_else(|| Error::InvalidInput("no trajectory starting points".into()))?;
    if !(padding >= 0.0) {
        return Err(Error::InvalidInput("padding must be non-negative".into()));
    }
    let n = first.len();
    let mut mean = vec![0.0; n];
    for s in starts {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / starts.len() as f64;
        }
    }
    let spread = starts
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    // Tiny relative slack keeps boundary points members after rounding.
    let radius = (spread + padding) * (1.0 + 1e-12);
    ball_set(&mean, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn unit_disk_and_box_membership() {
        let disk = ball_set(&[0.0, 0.0], 1.0).unwrap();
        assert!(disk.contains(&[0.0, 0.0]).unwrap());
        assert!(!disk.contains(&[2.0, 0.0]).unwrap());
        assert!(disk.contains(&[1.0, 0.0]).unwrap());
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let one = Polynomial::constant(2, 1.0);
        let boxed = BasicSemialgebraicSet::new(2, vec![x.clone(), &one - &x, y.clone(), &one - &y]).unwrap();
        assert!(boxed.contains(&[0.5, 1.0]).unwrap());
        assert!(matches!(disk.contains(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ellipse_examples() {
        let e = ellipse_set([0.0, 0.0], [1.0, 1.0], 0.0).unwrap();
        let expected = &Polynomial::constant(2, 1.0) - &Polynomial::norm_squared(2);
        assert!(e.inequalities()[0].sub(&expected).unwrap().max_abs_coefficient() < 1e-15);

        let e = ellipse_set([1.0, 0.0], [2.0, 1.0], 0.0).unwrap();
        assert!(e.margin(&[3.0, 0.0]).unwrap().abs() < 1e-12);

        let e = ellipse_set([0.0, 0.0], [1.0, 2.0], FRAC_PI_2).unwrap();
        assert!(e.contains(&[1.9, 0.0]).unwrap());
        assert!(!e.contains(&[0.0, 1.9]).unwrap());
        assert!(ellipse_set([0.0, 0.0], [0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn ball_examples() {
        let b = ball_set(&[2.0, 2.0], 0.5).unwrap();
        assert!(!b.contains(&[2.0, 2.6]).unwrap());
        assert!(ball_set(&[0.0], 0.0).is_err());
    }

    #[test]
    fn initial_set_examples() {
        let s = initial_set_from_points(&[vec![1.0, 1.0]], 0.1).unwrap();
        assert!(s.contains(&[1.0, 1.0]).unwrap());
        assert!(s.contains(&[1.0, 1.1 - 1e-9]).unwrap());
        assert!(!s.contains(&[1.0, 1.11]).unwrap());
        let s = initial_set_from_points(&[vec![0.0, 0.0], vec![2.0, 0.0]], 0.0).unwrap();
        assert!(s.contains(&[0.0, 0.0]).unwrap() && s.contains(&[2.0, 0.0]).unwrap());
        assert!(!s.contains(&[1.0, 1.01]).unwrap());
        assert!(initial_set_from_points(&[], 0.0).is_err());
    }

    #[test]
    fn pull_back_matches_direct_evaluation() {
        let e = ellipse_set([0.5, -0.2], [0.3, 0.1], 0.4).unwrap();
        let scale = [2.0, 0.5];
        let shift = [0.1, -0.3];
        let p = e.pull_back(&scale, &shift).unwrap();
        for y in [[0.1, 0.2], [-0.3, 0.5], [0.2, 0.2]] {
            let x = [scale[0] * y[0] + shift[0], scale[1] * y[1] + shift[1]];
            assert!((p.margin(&y).unwrap() - e.margin(&x).unwrap()).abs() < 1e-12);
        }
        let b = p.bounds().unwrap();
        let eb = e.bounds().unwrap();
        assert!((b.lo[0] * scale[0] + shift[0] - eb.lo[0]).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let e = ellipse_set([0.5, -0.2], [0.3, 0.1], 0.4).unwrap();
        let s = serde_json::to_string(&e).unwrap();
        let back: BasicSemialgebraicSet = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        assert!(serde_json::from_str::<BasicSemialgebraicSet>(r#"{"dim":2,"inequalities":[]}"#).is_err());
    }
}
