//! Learning globally stable polynomial dynamical systems from demonstrations,
//! jointly with barrier certificates for static obstacle avoidance, using
//! sum-of-squares programming.

pub mod dynsim;
pub mod error;
pub mod learner;
pub mod nonfinite;
pub mod poly;
pub mod sdp;
pub mod semialg;
pub mod sos;
pub mod synth;

pub use error::{Error, Result};
