use serde::{Deserialize, Serialize};

use super::LearnResult;
use crate::error::{Error, Result};
use crate::poly::{Polynomial, PolynomialVector};
use crate::semialg::BasicSemialgebraicSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub samples: Vec<Sample>,
}

/// Position/velocity samples grouped by demonstration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetJson", into = "DatasetJson")]
pub struct TrajectoryDataset {
    dim: usize,
    demonstrations: Vec<Demonstration>,
    attractor: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    dim: usize,
    demonstrations: Vec<Demonstration>,
    attractor: Vec<f64>,
}

impl TryFrom<DatasetJson> for TrajectoryDataset {
    type Error = Error;
    fn try_from(j: DatasetJson) -> Result<Self> {
        Self::new(j.dim, j.demonstrations, j.attractor)
    }
}

impl From<TrajectoryDataset> for DatasetJson {
    fn from(d: TrajectoryDataset) -> Self {
        DatasetJson {
            dim: d.dim,
            demonstrations: d.demonstrations,
            attractor: d.attractor,
        }
    }
}

impl TrajectoryDataset {
    pub fn new(dim: usize, demonstrations: Vec<Demonstration>, attractor: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dataset dimension must be positive".into()));
        }
        if attractor.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: attractor.len(),
            });
        }
        if demonstrations.is_empty() || demonstrations.iter().any(|d| d.samples.is_empty()) {
            return Err(Error::InvalidInput("dataset needs non-empty demonstrations".into()));
        }
        for s in demonstrations.iter().flat_map(|d| &d.samples) {
            for len in [s.x.len(), s.v.len()] {
                if len != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: len,
                    });
                }
            }
            if !s.t.is_finite() || s.x.iter().chain(&s.v).any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite sample value".into()));
            }
        }
        if attractor.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite attractor".into()));
        }
        Ok(Self {
            dim,
            demonstrations,
            attractor,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn demonstrations(&self) -> &[Demonstration] {
        &self.demonstrations
    }

    pub fn attractor(&self) -> &[f64] {
        &self.attractor
    }

    pub fn num_samples(&self) -> usize {
        self.demonstrations.iter().map(|d| d.samples.len()).sum()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.demonstrations.iter().flat_map(|d| &d.samples)
    }

    /// First position of every demonstration.
    pub fn starts(&self) -> Vec<Vec<f64>> {
        self.demonstrations.iter().map(|d| d.samples[0].x.clone()).collect()
    }

    fn map_samples<F: Fn(&Sample) -> Sample>(&self, attractor: Vec<f64>, f: F) -> Self {
        Self {
            dim: self.dim,
            demonstrations: self
                .demonstrations
                .iter()
                .map(|d| Demonstration {
                    samples: d.samples.iter().map(&f).collect(),
                })
                .collect(),
            attractor,
        }
    }
}

/// Affine normalization `x' = scale * (x - translation)`, `v' = velocity_scale * v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub translation: Vec<f64>,
    pub scale: Vec<f64>,
    pub velocity_scale: Vec<f64>,
}

impl ScalingRecord {
    pub fn identity(dim: usize) -> Self {
        Self {
            translation: vec![0.0; dim],
            scale: vec![1.0; dim],
            velocity_scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn is_identity(&self) -> bool {
        self.translation.iter().all(|&t| t == 0.0) && self.scale.iter().chain(&self.velocity_scale).all(|&s| s == 1.0)
    }

    pub fn apply_position(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| self.scale[k] * (v - self.translation[k]))
            .collect()
    }

    pub fn invert_position(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(k, v)| v / self.scale[k] + self.translation[k])
            .collect()
    }

    pub fn apply_velocity(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.velocity_scale).map(|(a, s)| a * s).collect()
    }

    pub fn invert_velocity(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.velocity_scale).map(|(a, s)| a / s).collect()
    }

    pub fn apply_dataset(&self, ds: &TrajectoryDataset) -> TrajectoryDataset {
        ds.map_samples(self.apply_position(ds.attractor()), |s| Sample {
            t: s.t,
            x: self.apply_position(&s.x),
            v: self.apply_velocity(&s.v),
        })
    }

    pub fn invert_dataset(&self, ds: &TrajectoryDataset) -> TrajectoryDataset {
        ds.map_samples(self.invert_position(ds.attractor()), |s| Sample {
            t: s.t,
            x: self.invert_position(&s.x),
            v: self.invert_velocity(&s.v),
        })
    }

    /// An original-frame set expressed in normalized coordinates.
    pub fn normalize_set(&self, set: &BasicSemialgebraicSet) -> Result<BasicSemialgebraicSet> {
        let inv: Vec<f64> = self.scale.iter().map(|s| 1.0 / s).collect();
        set.pull_back(&inv, &self.translation)
    }

    /// A normalized-frame polynomial expressed in original coordinates:
    /// `q(x) = p(scale * (x - translation))`.
    pub fn denormalize_polynomial(&self, p: &Polynomial) -> Result<Polynomial> {
        let shift: Vec<f64> = self.scale.iter().zip(&self.translation).map(|(s, t)| -s * t).collect();
        p.affine_substitute(&self.scale, &shift)
    }
}

/// Shifts positions so the attractor sits at the origin.
pub fn recenter(ds: &TrajectoryDataset) -> (TrajectoryDataset, ScalingRecord) {
    let rec = ScalingRecord {
        translation: ds.attractor().to_vec(),
        ..ScalingRecord::identity(ds.dim())
    };
    (rec.apply_dataset(ds), rec)
}

/// Scales each axis of a recentered dataset so that its largest absolute
/// position coordinate is 1; velocities share the per-axis factor.
pub fn normalize(ds: &TrajectoryDataset) -> Result<(TrajectoryDataset, ScalingRecord)> {
    let mut max_abs = vec![0.0f64; ds.dim()];
    for s in ds.samples() {
        for (m, x) in max_abs.iter_mut().zip(&s.x) {
            *m = m.max(x.abs());
        }
    }
    if let Some(axis) = max_abs.iter().position(|&m| m == 0.0) {
        return Err(Error::DegenerateAxis { axis });
    }
    let scale: Vec<f64> = max_abs.iter().map(|m| 1.0 / m).collect();
    let rec = ScalingRecord {
        translation: vec![0.0; ds.dim()],
        velocity_scale: scale.clone(),
        scale,
    };
    Ok((rec.apply_dataset(ds), rec))
}

/// Keeps `count` uniformly strided samples per demonstration, always
/// including the first and last.
pub fn subsample(ds: &TrajectoryDataset, count: usize) -> Result<TrajectoryDataset> {
    let mut demos = Vec::with_capacity(ds.demonstrations().len());
    for (i, d) in ds.demonstrations().iter().enumerate() {
        let len = d.samples.len();
        if len < count {
            return Err(Error::InvalidInput(format!(
                "demonstration {i} has {len} samples, fewer than {count}"
            )));
        }
        if count == len {
            demos.push(d.clone());
            continue;
        }
        if count < 2 {
            return Err(Error::InvalidInput("subsample count must be at least 2".into()));
        }
        let samples = (0..count)
            .map(|j| {
                let idx = (j * (len - 1) + (count - 1) / 2) / (count - 1);
                d.samples[idx].clone()
            })
            .collect();
        demos.push(Demonstration { samples });
    }
    TrajectoryDataset::new(ds.dim(), demos, ds.attractor().to_vec())
}

/// Drops samples whose position exactly repeats an earlier one. Returns the
/// cleaned dataset and the number of samples removed.
pub fn dedupe(ds: &TrajectoryDataset) -> Result<(TrajectoryDataset, usize)> {
    let mut seen = std::collections::BTreeSet::new();
    let mut removed = 0;
    let mut demos = Vec::new();
    for d in ds.demonstrations() {
        let mut samples = Vec::with_capacity(d.samples.len());
        for s in &d.samples {
            let key: Vec<u64> = s.x.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                samples.push(s.clone());
            } else {
                removed += 1;
            }
        }
        if !samples.is_empty() {
            demos.push(Demonstration { samples });
        }
    }
    if removed > 0 {
        log::warn!("removed {removed} samples with duplicate positions");
    }
    Ok((
        TrajectoryDataset::new(ds.dim(), demos, ds.attractor().to_vec())?,
        removed,
    ))
}

/// Dedupe, recenter, normalize, then subsample to at most `per_demo`
/// samples per demonstration.
pub fn preprocess(ds: &TrajectoryDataset, per_demo: Option<usize>) -> Result<(TrajectoryDataset, ScalingRecord)> {
    let (ds, _) = dedupe(ds)?;
    let (centered, shift) = recenter(&ds);
    let (mut norm, scale) = normalize(&centered)?;
    if let Some(count) = per_demo {
        let shortest = norm.demonstrations().iter().map(|d| d.samples.len()).min().unwrap_or(0);
        let demos = norm
            .demonstrations()
            .iter()
            .map(|d| {
                let one = TrajectoryDataset::new(norm.dim(), vec![d.clone()], norm.attractor().to_vec())?;
                let c = count.min(d.samples.len()).max(2.min(d.samples.len()));
                Ok(subsample(&one, c)?.demonstrations()[0].clone())
            })
            .collect::<Result<Vec<_>>>()?;
        if shortest < count {
            log::info!("some demonstrations have fewer than {count} samples; kept all of them");
        }
        norm = TrajectoryDataset::new(norm.dim(), demos, norm.attractor().to_vec())?;
    }
    let rec = ScalingRecord {
        translation: shift.translation,
        scale: scale.scale,
        velocity_scale: scale.velocity_scale,
    };
    Ok((norm, rec))
}

/// Mean squared velocity error `(1/N) sum |v_i - f(x_i)|^2`.
pub fn mse(f: &PolynomialVector, ds: &TrajectoryDataset) -> Result<f64> {
    if f.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: f.len(),
        });
    }
    if f.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: f.dim(),
        });
    }
    let n = ds.num_samples();
    if n == 0 {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let mut out = vec![0.0; ds.dim()];
    let mut acc = 0.0;
    for s in ds.samples() {
        f.eval_into(&s.x, &mut out);
        acc += out.iter().zip(&s.v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(acc / n as f64)
}

/// Expresses a normalized-frame result in original coordinates:
/// `f_out(x) = S^-1 f(S (x - x*))`, and `V`, `B`, multipliers composed with
/// the same map. Gram certificates refer to the normalized frame and are
/// dropped unless the scaling is the identity.
pub fn denormalize(result: &LearnResult, scaling: &ScalingRecord) -> Result<LearnResult> {
    if scaling.is_identity() {
        return Ok(result.clone());
    }
    let comp = |p: &Polynomial| scaling.denormalize_polynomial(p);
    let f = result
        .f
        .iter()
        .enumerate()
        .map(|(k, p)| Ok(comp(p)?.scale(1.0 / scaling.velocity_scale[k])))
        .collect::<Result<Vec<_>>>()?;
    let mut out = result.clone();
    out.f = PolynomialVector::new(f)?;
    out.v = comp(&result.v)?;
    out.b = result.b.as_ref().map(comp).transpose()?;
    out.phi = result.phi.as_ref().map(comp).transpose()?;
    out.tau = result.tau.iter().map(comp).collect::<Result<_>>()?;
    out.sigma = result
        .sigma
        .iter()
        .map(|s| s.iter().map(comp).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    out.gram_certificates.clear();
    out.diagnostics
        .notes
        .push("expressed in original coordinates; certificates refer to the normalized frame".into());
    out.scaling = ScalingRecord::identity(scaling.dim());
    Ok(out)
}

/// Ball enclosing the starting points of every demonstration, enlarged by
/// `padding`.
pub fn make_initial_set(ds: &TrajectoryDataset, padding: f64) -> Result<BasicSemialgebraicSet> {
    crate::semialg::initial_set_from_points(&ds.starts(), padding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo(points: &[([f64; 2], [f64; 2])]) -> Demonstration {
        Demonstration {
            samples: points
                .iter()
                .enumerate()
                .map(|(i, (x, v))| Sample {
                    t: i as f64,
                    x: x.to_vec(),
                    v: v.to_vec(),
                })
                .collect(),
        }
    }

    #[test]
    fn recenter_moves_attractor_to_origin() {
        let ds = TrajectoryDataset::new(
            2,
            vec![demo(&[([1.0, 1.0], [0.0, 0.0]), ([2.0, 3.0], [1.0, 1.0])])],
            vec![1.0, 1.0],
        )
        .unwrap();
        let (c, rec) = recenter(&ds);
        assert_eq!(c.demonstrations()[0].samples[0].x, vec![0.0, 0.0]);
        assert_eq!(c.attractor(), &[0.0, 0.0]);
        assert_eq!(c.demonstrations()[0].samples[1].v, vec![1.0, 1.0]);
        assert_eq!(rec.invert_dataset(&c), ds);
    }

    #[test]
    fn normalize_uses_max_abs() {
        let ds = TrajectoryDataset::new(
            2,
            vec![demo(&[([-4.0, 0.5], [1.0, 1.0]), ([4.0, -1.0], [2.0, 0.0])])],
            vec![0.0, 0.0],
        )
        .unwrap();
        let (n, rec) = normalize(&ds).unwrap();
        assert_eq!(rec.scale, vec![0.25, 1.0]);
        assert_eq!(n.demonstrations()[0].samples[1].x, vec![1.0, -1.0]);
        assert_eq!(n.demonstrations()[0].samples[0].v, vec![0.25, 1.0]);
        let (again, rec2) = normalize(&n).unwrap();
        assert!(rec2.is_identity());
        assert_eq!(again, n);

        let flat = TrajectoryDataset::new(2, vec![demo(&[([1.0, 0.0], [0.0, 0.0])])], vec![0.0, 0.0]).unwrap();
        assert!(matches!(normalize(&flat), Err(Error::DegenerateAxis { axis: 1 })));
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let pts: Vec<([f64; 2], [f64; 2])> = (0..1000).map(|i| ([i as f64, 0.0], [0.0, 0.0])).collect();
        let ds = TrajectoryDataset::new(2, vec![demo(&pts)], vec![0.0, 0.0]).unwrap();
        let s = subsample(&ds, 100).unwrap();
        let got = &s.demonstrations()[0].samples;
        assert_eq!(got.len(), 100);
        assert_eq!(got[0].x[0], 0.0);
        assert_eq!(got[99].x[0], 999.0);
        assert_eq!(subsample(&ds, 1000).unwrap(), ds);
        assert!(subsample(&ds, 1001).is_err());

        let five = TrajectoryDataset::new(2, vec![demo(&pts[..5])], vec![0.0, 0.0]).unwrap();
        let two = subsample(&five, 2).unwrap();
        let xs: Vec<f64> = two.samples().map(|s| s.x[0]).collect();
        assert_eq!(xs, vec![0.0, 4.0]);
    }

    #[test]
    fn mse_examples() {
        let ds = TrajectoryDataset::new(
            2,
            vec![demo(&[([1.0, 0.0], [1.0, 0.0]), ([0.0, 2.0], [0.0, 3.0])])],
            vec![0.0, 0.0],
        )
        .unwrap();
        let zero = PolynomialVector::zero(2, 2);
        // residual norms 1 and 3
        assert_eq!(mse(&zero, &ds).unwrap(), 5.0);
        let wrong = PolynomialVector::zero(3, 3);
        assert!(mse(&wrong, &ds).is_err());
    }

    #[test]
    fn dedupe_drops_repeats() {
        let ds = TrajectoryDataset::new(
            2,
            vec![demo(&[
                ([1.0, 0.0], [1.0, 0.0]),
                ([1.0, 0.0], [2.0, 0.0]),
                ([0.5, 0.0], [1.0, 0.0]),
            ])],
            vec![0.0, 0.0],
        )
        .unwrap();
        let (d, removed) = dedupe(&ds).unwrap();
        assert_eq!(removed, 1);
        assert_eq!(d.num_samples(), 2);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(TrajectoryDataset::new(2, vec![], vec![0.0, 0.0]).is_err());
    }
}
