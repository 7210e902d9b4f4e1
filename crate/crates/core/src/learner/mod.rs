//! Learning stable polynomial dynamical systems, optionally with a barrier
//! certificate, from demonstration data.

mod data;
mod program;
mod warm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use data::{
    dedupe, denormalize, make_initial_set, mse, normalize, preprocess, recenter, subsample, Demonstration, Sample,
    ScalingRecord, TrajectoryDataset,
};
pub use program::{certificate_expressions, learn, learn_unconstrained, verify_certificates};
pub use warm::warm_start;

use crate::error::Error;
use crate::poly::{Polynomial, PolynomialVector};
use crate::sdp::SolveStatus;
use crate::sos::GramCertificate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub deg_f: usize,
    pub deg_v: usize,
    pub deg_b: usize,
    /// Multiplier degrees; `None` picks the smallest even degree that keeps
    /// the constraint degree consistent.
    pub deg_tau: Option<usize>,
    pub deg_sigma: Option<usize>,
    pub deg_phi: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub max_rounds: usize,
    /// Relative decrease of the fitting objective below which rounds stop.
    pub tol: f64,
    pub seed: u64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Unsafe-set samples per obstacle used to initialize the barrier.
    pub unsafe_samples: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            deg_f: 3,
            deg_v: 2,
            deg_b: 4,
            deg_tau: None,
            deg_sigma: None,
            deg_phi: 0,
            eps1: 1e-2,
            eps2: 1e-3,
            eps3: 1e-4,
            max_rounds: 30,
            tol: 1e-4,
            seed: 0,
            solver_tol: 1e-7,
            solver_max_iter: 200,
            unsafe_samples: 200,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.eps1 > 0.0 && self.eps2 > 0.0 && self.eps3 > 0.0) {
            return bad("eps1, eps2 and eps3 must be positive");
        }
        if self.deg_f == 0 || self.deg_b == 0 {
            return bad("deg_f and deg_b must be positive");
        }
        if self.deg_v < 2 || self.deg_v % 2 == 1 {
            return bad("deg_v must be even and at least 2");
        }
        let odd = |d: Option<usize>| d.is_some_and(|d| d % 2 == 1);
        if odd(self.deg_tau) || odd(self.deg_sigma) || self.deg_phi % 2 == 1 {
            return bad("multiplier degrees must be even");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be positive");
        }
        if !(self.tol > 0.0) || !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return bad("tolerances must be positive (solver_tol below 1)");
        }
        if self.solver_max_iter == 0 {
            return bad("solver_max_iter must be positive");
        }
        Ok(())
    }
}

/// Certificate of one SOS constraint of the final result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedCertificate {
    pub label: String,
    pub certificate: GramCertificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub round: usize,
    pub phase: String,
    pub status: SolveStatus,
    #[serde(deserialize_with = "crate::nonfinite::deserialize")]
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub phases: Vec<PhaseRecord>,
    /// Fitting objective after each dynamics phase.
    pub objective_trace: Vec<f64>,
    pub degree_adjustments: Vec<String>,
    pub notes: Vec<String>,
    pub rounds: usize,
    /// Final constraint slack of the barrier phases (`<= 0` when certified).
    pub barrier_slack: Option<f64>,
}

/// Learned system in normalized coordinates; `scaling` maps back to the
/// original frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub f: PolynomialVector,
    pub v: Polynomial,
    pub b: Option<Polynomial>,
    pub tau: Vec<Polynomial>,
    pub sigma: Vec<Vec<Polynomial>>,
    pub phi: Option<Polynomial>,
    pub gram_certificates: Vec<NamedCertificate>,
    pub mse: f64,
    pub scaling: ScalingRecord,
    pub config: LearnConfig,
    pub diagnostics: Diagnostics,
}

/// Degrees to try after an infeasible phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSuggestion {
    pub deg_f: usize,
    pub deg_v: usize,
    pub deg_b: usize,
}

impl std::fmt::Display for DegreeSuggestion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "deg_f={}, deg_v={}, deg_b={}", self.deg_f, self.deg_v, self.deg_b)
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("{phase} phase failed with status {status:?}; suggested degrees: {suggestion}")]
    Infeasible {
        phase: String,
        status: SolveStatus,
        suggestion: DegreeSuggestion,
        last_feasible: Option<Box<LearnResult>>,
    },

    #[error("barrier not certified after {rounds} rounds (slack {slack:.3e}); suggested degrees: {suggestion}")]
    NotCertified {
        rounds: usize,
        slack: f64,
        suggestion: DegreeSuggestion,
        last_feasible: Option<Box<LearnResult>>,
    },

    #[error("certificate re-verification failed for `{label}`: {reason}")]
    Verification { label: String, reason: String },

    #[error("reference sample {index} lies in unsafe set {set}")]
    SampleInUnsafeSet { index: usize, set: usize },

    #[error("the attractor lies in unsafe set {0}")]
    AttractorInUnsafeSet(usize),

    #[error(transparent)]
    Core(#[from] Error),
}

impl LearnError {
    pub fn last_feasible(&self) -> Option<&LearnResult> {
        match self {
            LearnError::Infeasible { last_feasible, .. } | LearnError::NotCertified { last_feasible, .. } => {
                last_feasible.as_deref()
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = LearnConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!((c.eps1, c.eps2, c.eps3), (1e-2, 1e-3, 1e-4));
        let bad = LearnConfig {
            eps2: 0.0,
            ..LearnConfig::default()
        };
        assert!(bad.validate().is_err());
        let odd_v = LearnConfig {
            deg_v: 3,
            ..LearnConfig::default()
        };
        assert!(odd_v.validate().is_err());
        let parsed: LearnConfig = serde_json::from_str(r#"{"deg_f": 5}"#).unwrap();
        assert_eq!(parsed.deg_f, 5);
        assert_eq!(parsed.deg_v, 2);
        assert!(serde_json::from_str::<LearnConfig>(r#"{"degf": 5}"#).is_err());
    }
}
