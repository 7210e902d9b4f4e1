//! JSON file formats read and written by the tool.

use certds::dynsim::{FalsificationReport, RolloutReport};
use certds::error::Result;
use certds::learner::LearnConfig;
use certds::semialg::{ball_set, ellipse_set, BasicSemialgebraicSet, Polygon2D};
use serde::{Deserialize, Serialize};

/// Run configuration: learner settings plus preprocessing options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub learner: LearnConfig,
    /// Samples kept per demonstration; `None` keeps all.
    pub subsample: Option<usize>,
    /// Padding of the ball around the demonstration starts used as the
    /// initial set, in normalized units.
    pub initial_padding: f64,
    /// Attractor in original coordinates; defaults to the mean endpoint.
    pub attractor: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            learner: LearnConfig::default(),
            subsample: None,
            initial_padding: 0.02,
            attractor: None,
        }
    }
}

/// Metadata attached to obstacles produced by `fit-obstacle`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInfo {
    pub margin: f64,
    pub degree: usize,
    pub offset: f64,
    pub worst_margin: f64,
}

/// Unsafe set in original coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    Semialgebraic {
        set: BasicSemialgebraicSet,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit: Option<FitInfo>,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl ObstacleSpec {
    pub fn to_set(&self) -> Result<BasicSemialgebraicSet> {
        match self {
            ObstacleSpec::Semialgebraic { set, .. } => Ok(set.clone()),
            ObstacleSpec::Ellipse {
                center,
                semi_axes,
                rotation,
            } => ellipse_set(*center, *semi_axes, *rotation),
            ObstacleSpec::Ball { center, radius } => ball_set(center, *radius),
        }
    }
}

/// One polygon or several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolygonFile {
    One { vertices: Vec<[f64; 2]> },
    Many { polygons: Vec<Vec<[f64; 2]>> },
}

impl PolygonFile {
    pub fn polygons(&self) -> Result<Vec<Polygon2D>> {
        match self {
            PolygonFile::One { vertices } => Ok(vec![Polygon2D::new(vertices.clone())?]),
            PolygonFile::Many { polygons } => polygons.iter().map(|v| Polygon2D::new(v.clone())).collect(),
        }
    }
}

/// Initial and unsafe sets in the normalized frame of a result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsFile {
    pub initial: Option<BasicSemialgebraicSet>,
    #[serde(rename = "unsafe")]
    pub unsafe_sets: Vec<BasicSemialgebraicSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMetric {
    pub index: usize,
    /// Distance between the rollout from the first sample and the last sample
    /// after the demonstration's duration; NaN if the rollout failed.
    #[serde(deserialize_with = "certds::nonfinite::deserialize")]
    pub endpoint_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Reference samples with `B > 0`.
    pub positive: usize,
}

/// Output of `eval`, in normalized units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub mse: f64,
    pub samples: usize,
    pub duplicates_removed: usize,
    pub trajectories: Vec<TrajectoryMetric>,
    pub barrier: Option<BarrierStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateCheck {
    pub passed: bool,
    pub error: Option<String>,
}

/// Output of `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub passed: bool,
    pub certificates: CertificateCheck,
    pub falsification: FalsificationReport,
    pub rollouts: Option<RolloutReport>,
}
