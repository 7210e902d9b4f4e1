use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BasicSemialgebraicSet, BoundingBox};
use crate::error::{Error, Result};
use crate::poly::{monomial_basis, Polynomial};

/// Simple planar polygon, stored counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon2D {
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for Polygon2D {
    type Error = Error;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Polygon2D> for Vec<[f64; 2]> {
    fn from(p: Polygon2D) -> Self {
        p.vertices
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2], d: f64| {
        d == 0.0 && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

impl Polygon2D {
    /// Validates a simple polygon with at least three vertices; clockwise
    /// input is reoriented.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite polygon vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if a == b {
                return Err(Error::InvalidInput(format!("repeated polygon vertex {i}")));
            }
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(a, b, vertices[j], vertices[(j + 1) % n]) {
                    return Err(Error::InvalidInput(format!("polygon edges {i} and {j} intersect")));
                }
            }
        }
        let area = Self::signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::InvalidInput("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    fn signed_area(v: &[[f64; 2]]) -> f64 {
        let n = v.len();
        (0..n).map(|i| cross([0.0, 0.0], v[i], v[(i + 1) % n])).sum::<f64>() / 2.0
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Closed-set membership (boundary included).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        if self.boundary_distance(p) <= 1e-12 {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Positive inside, negative outside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let d = self.boundary_distance(p);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let mut lo = vec![f64::INFINITY; 2];
        let mut hi = vec![f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        BoundingBox { lo, hi }
    }

    /// Offsets every edge outward by `margin`, placing each new vertex at the
    /// intersection of its two offset edges (along the angle bisector).
    pub fn dilate(&self, margin: f64) -> Result<Polygon2D> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::InvalidInput("margin must be non-negative".into()));
        }
        if margin == 0.0 {
            return Ok(self.clone());
        }
        let n = self.vertices.len();
        let normal = |a: [f64; 2], b: [f64; 2]| {
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let l = (dx * dx + dy * dy).sqrt();
            [dy / l, -dx / l]
        };
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = self.vertices[(i + n - 1) % n];
            let cur = self.vertices[i];
            let next = self.vertices[(i + 1) % n];
            let n1 = normal(prev, cur);
            let n2 = normal(cur, next);
            let denom = 1.0 + n1[0] * n2[0] + n1[1] * n2[1];
            // Near-reversal edges: clamp the miter length.
            let k = margin / denom.max(0.25);
            out.push([cur[0] + k * (n1[0] + n2[0]), cur[1] + k * (n1[1] + n2[1])]);
        }
        Polygon2D::new(out)
    }

    /// Grid points of the closed polygon on a `density x density` lattice
    /// over its bounding box, plus vertices and `density` points per edge.
    pub fn sample_points(&self, density: usize) -> Vec<[f64; 2]> {
        let bb = self.bounding_box();
        let mut pts = Vec::new();
        let d = density.max(2);
        for i in 0..d {
            for j in 0..d {
                let x = bb.lo[0] + (bb.hi[0] - bb.lo[0]) * i as f64 / (d - 1) as f64;
                let y = bb.lo[1] + (bb.hi[1] - bb.lo[1]) * j as f64 / (d - 1) as f64;
                if self.contains([x, y]) {
                    pts.push([x, y]);
                }
            }
        }
        for (a, b) in self.edges() {
            for s in 0..d {
                let t = s as f64 / d as f64;
                pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        pts
    }
}

/// Result of [`fit_unsafe_polynomial`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstacleFit {
    pub set: BasicSemialgebraicSet,
    /// Smallest `g` over the dilated-polygon validation points (`>= 0`).
    pub worst_margin: f64,
    /// Constant added after the least-squares fit.
    pub offset: f64,
}

/// Fits `{g >= 0}` covering `polygon` dilated by `margin`.
///
/// `g` is a least-squares fit of a clipped signed distance over a square grid
/// three times the polygon's extent, then shifted up so that every validation
/// point of the dilated polygon satisfies `g >= 0`. Fails if the shifted set
/// reaches the edge of the fitting region.
pub fn fit_unsafe_polynomial(
    polygon: &Polygon2D,
    margin: f64,
    degree: usize,
    grid_density: usize,
) -> Result<ObstacleFit> {
    if degree < 2 || degree % 2 == 1 {
        return Err(Error::InvalidInput(format!(
            "fit degree must be even and >= 2, got {degree}"
        )));
    }
    if grid_density < 2 {
        return Err(Error::InvalidInput("grid density must be at least 2".into()));
    }
    let dilated = polygon.dilate(margin)?;
    let bb = dilated.bounding_box();
    let center = [(bb.lo[0] + bb.hi[0]) / 2.0, (bb.lo[1] + bb.hi[1]) / 2.0];
    let extent = (bb.hi[0] - bb.lo[0]).max(bb.hi[1] - bb.lo[1]);
    let radius = 0.75 * extent;
    let to_u = |p: [f64; 2]| [(p[0] - center[0]) / radius, (p[1] - center[1]) / radius];
    let from_u = |u: [f64; 2]| [center[0] + radius * u[0], center[1] + radius * u[1]];

    let basis = monomial_basis(2, degree);
    let width = 0.1 * extent;
    let fit_n = grid_density.max(4 * degree);
    let mut rows = Vec::with_capacity(fit_n * fit_n);
    let mut targets = Vec::with_capacity(fit_n * fit_n);
    for i in 0..fit_n {
        for j in 0..fit_n {
            let u = [
                -1.0 + 2.0 * i as f64 / (fit_n - 1) as f64,
                -1.0 + 2.0 * j as f64 / (fit_n - 1) as f64,
            ];
            rows.push(basis.iter().map(|m| m.evaluate(&u)).collect::<Vec<_>>());
            targets.push((dilated.signed_distance(from_u(u)) / width).clamp(-1.0, 1.0));
        }
    }
    let a = DMatrix::from_fn(rows.len(), basis.len(), |r, c| rows[r][c]);
    let b = DVector::from_vec(targets);
    let inside: Vec<bool> = b.iter().map(|&t| t >= 0.0).collect();
    // Reweighted least squares: points of the obstacle that the fit leaves
    // negative gain weight, which keeps the final offset small.
    let mut w: DVector<f64> = DVector::from_element(b.len(), 1.0);
    let mut coef = DVector::zeros(basis.len());
    for _ in 0..40 {
        let aw = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] * w[r].sqrt());
        let bw = b.component_mul(&w.map(f64::sqrt));
        coef = aw
            .svd(true, true)
            .solve(&bw, 1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let fit = &a * &coef;
        let mut changed = false;
        for r in 0..fit.len() {
            if inside[r] && fit[r] < 0.0 {
                w[r] *= 2.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut g = Polynomial::from_terms(2, basis.iter().cloned().zip(coef.iter().copied()))?;

    // Force the leading form negative so the set stays bounded.
    let top = g.homogeneous_part(degree);
    let lead = (0..720)
        .map(|k| {
            let th = k as f64 * std::f64::consts::PI / 360.0;
            top.eval(&[th.cos(), th.sin()])
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = 0.05;
    if lead > -floor {
        let r2 = Polynomial::norm_squared(2).pow((degree / 2) as u32);
        g = &g - &r2.scale(lead + floor);
    }

    let checks: Vec<[f64; 2]> = dilated.sample_points(grid_density);
    let worst = checks.iter().map(|&p| g.eval(&to_u(p))).fold(f64::INFINITY, f64::min);
    let scale = 1.0 + g.max_abs_coefficient();
    let offset = (-worst).max(0.0) + 1e-6 * scale;
    g = &g + &Polynomial::constant(2, offset);
    let worst_margin = worst + offset;

    // The set must close up inside the fitting square.
    let ring = 4 * fit_n;
    let mut leak: Option<([f64; 2], f64)> = None;
    for s in [1.0, 1.5, 2.0, 3.0] {
        for k in 0..ring {
            let t = -1.0 + 2.0 * k as f64 / ring as f64;
            for u in [[s * t, -s], [s, s * t], [-s * t, s], [-s, -s * t]] {
                let v = g.eval(&u);
                if v >= 0.0 && leak.map_or(true, |(_, w)| v > w) {
                    leak = Some((u, v));
                }
            }
        }
    }
    if let Some((u, v)) = leak {
        let p = from_u(u);
        return Err(Error::InfeasibleFit {
            x: p[0],
            y: p[1],
            violation: v,
        });
    }

    let g_x = g.affine_substitute(&[1.0 / radius; 2], &[-center[0] / radius, -center[1] / radius])?;
    let set = BasicSemialgebraicSet::new(2, vec![g_x])?.with_bounds(BoundingBox {
        lo: vec![center[0] - radius, center[1] - radius],
        hi: vec![center[0] + radius, center[1] + radius],
    })?;
    Ok(ObstacleFit {
        set,
        worst_margin,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon2D {
        Polygon2D::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn u_shape() -> Polygon2D {
        Polygon2D::new(vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [2.5, 3.0],
            [2.5, 0.75],
            [0.5, 0.75],
            [0.5, 3.0],
            [0.0, 3.0],
        ])
        .unwrap()
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(Polygon2D::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // bow tie
        assert!(Polygon2D::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).is_err());
        let cw = Polygon2D::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(Polygon2D::signed_area(cw.vertices()) > 0.0);
    }

    #[test]
    fn dilation_grows_square() {
        let d = square().dilate(0.1).unwrap();
        let bb = d.bounding_box();
        assert!((bb.lo[0] + 0.1).abs() < 1e-12 && (bb.hi[1] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn unit_square_fit_contains_center_and_corners() {
        let fit = fit_unsafe_polynomial(&square(), 0.0, 2, 40).unwrap();
        for p in [[0.5, 0.5], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]] {
            assert!(fit.set.contains(&p).unwrap(), "{p:?}");
        }
        assert!(fit.worst_margin >= 0.0);
        assert!(!fit.set.contains(&[3.0, 3.0]).unwrap());
    }

    #[test]
    fn u_shape_leaves_mouth_free() {
        let u = u_shape();
        let fit = fit_unsafe_polynomial(&u, 0.0, 4, 60).unwrap();
        for p in u.sample_points(60) {
            assert!(fit.set.contains(&p).unwrap(), "{p:?}");
        }
        // A point inside the convex hull but outside the polygon.
        let mouth = (0..20)
            .map(|k| [1.5, 1.2 + 1.8 * k as f64 / 19.0])
            .any(|p| !fit.set.contains(&p).unwrap());
        assert!(mouth);
    }
}
