//! Associative spatial-temporal memories on restricted-connectivity
//! threshold networks.
//!
//! A movie of bipolar frames is recorded into the weights of an `L x L`
//! toroidal lattice whose cells each see an `m x m` window of neighbours.
//! Retrieval runs synchronous sign dynamics from one (possibly corrupted)
//! frame. The crate provides four recorders, the readout, closed-form error
//! and capacity formulas, a T-CAM baseline, and a seeded Monte Carlo harness
//! for capacity, noise and variability sweeps.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod recording;
pub mod retrieval;
pub mod rng;
pub mod selftest;
pub mod special;
pub mod stats;
pub mod tcam;

pub use error::{AstmError, Result};
pub use lattice::{ConnectivityMap, LatticeConfig, Movie, Pixel};
pub use par::Exec;
pub use recording::{Method, RecordingReport, WeightMatrix};
pub use retrieval::{RetrievalTrace, Status};

/// Probabilities and other reals in CSV output: 12 significant digits.
pub fn fmt_prob(x: f64) -> String {
    format!("{x:.11e}")
}
