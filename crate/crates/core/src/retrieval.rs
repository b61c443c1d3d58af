//! Globally-synchronous readout.
//!
//! One step maps a whole frame to the next: every cell thresholds the
//! weighted sum of its neighbours' previous outputs, all reading the same
//! input frame.

use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;

use crate::error::{AstmError, Result};
use crate::lattice::{ConnectivityMap, Movie, Pixel};
use crate::linalg::{dot, sgn};
use crate::recording::WeightMatrix;
use crate::rng;

/// Cell output model `V = V0 sgn(I)`. Retrieval outcomes do not depend on
/// `V0`; it only scales the physical output voltage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationModel {
    pub v0: f64,
}

impl Default for ActivationModel {
    fn default() -> Self {
        ActivationModel { v0: 1.0 }
    }
}

impl ActivationModel {
    pub fn output(&self, current: f64) -> f64 {
        self.v0 * sgn(current)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Recovered,
    Corrupted,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Recovered => "Recovered",
            Status::Corrupted => "Corrupted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalTrace {
    /// Hamming distance to the true frame at each step; entry 0 is the input.
    pub wrong_counts: Vec<usize>,
    pub status: Status,
    pub steps_run: usize,
    pixels: usize,
}

impl RetrievalTrace {
    fn new(wrong_counts: Vec<usize>, pixels: usize) -> Self {
        // Recovered iff the count reaches zero and stays there, i.e. the
        // final entry is zero.
        let status = if wrong_counts.last() == Some(&0) {
            Status::Recovered
        } else {
            Status::Corrupted
        };
        RetrievalTrace {
            steps_run: wrong_counts.len() - 1,
            wrong_counts,
            status,
            pixels,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels
    }

    /// `step,wrong_count,wrong_fraction` rows followed by a `status,<verdict>`
    /// line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,wrong_count,wrong_fraction\n");
        for (k, &w) in self.wrong_counts.iter().enumerate() {
            let frac = w as f64 / self.pixels as f64;
            let _ = writeln!(out, "{k},{w},{}", crate::fmt_prob(frac));
        }
        let _ = writeln!(out, "status,{}", self.status);
        out
    }
}

fn check_dims(weights: &WeightMatrix, conn: &ConnectivityMap, pixels: usize) -> Result<()> {
    if weights.cell_count() != conn.cell_count() || weights.arity() != conn.arity() {
        return Err(AstmError::DimensionMismatch {
            what: "weights for connectivity",
            expected: conn.cell_count() * conn.arity(),
            got: weights.cell_count() * weights.arity(),
        });
    }
    if pixels != conn.cell_count() {
        return Err(AstmError::DimensionMismatch {
            what: "frame pixels",
            expected: conn.cell_count(),
            got: pixels,
        });
    }
    Ok(())
}

/// Reusable buffers for repeated steps.
pub(crate) struct Stepper<'a> {
    weights: &'a WeightMatrix,
    conn: &'a ConnectivityMap,
    gathered: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(weights: &'a WeightMatrix, conn: &'a ConnectivityMap) -> Self {
        Stepper {
            weights,
            conn,
            gathered: vec![0.0; conn.arity()],
        }
    }

    /// `next_i = sgn(sum_j w_ij prev_j)` for every cell, reading only `prev`.
    pub(crate) fn advance(&mut self, prev: &[f64], next: &mut [f64]) {
        for (i, out) in next.iter_mut().enumerate() {
            for (g, &j) in self.gathered.iter_mut().zip(self.conn.neighbors(i)) {
                *g = prev[j as usize];
            }
            *out = sgn(dot(self.weights.row(i), &self.gathered));
        }
    }
}

fn to_f64(frame: &[Pixel]) -> Vec<f64> {
    frame.iter().map(|&s| s as f64).collect()
}

fn wrong(state: &[f64], truth: &[Pixel]) -> usize {
    state
        .iter()
        .zip(truth)
        .filter(|(&a, &b)| a != b as f64)
        .count()
}

/// One synchronous update of every cell.
pub fn step(weights: &WeightMatrix, conn: &ConnectivityMap, frame: &[Pixel]) -> Result<Vec<Pixel>> {
    check_dims(weights, conn, frame.len())?;
    let prev = to_f64(frame);
    let mut next = vec![0.0; prev.len()];
    Stepper::new(weights, conn).advance(&prev, &mut next);
    Ok(next.into_iter().map(|v| v as Pixel).collect())
}

/// Runs `horizon` steps from `input`, which stands for frame `start_index`
/// of `truth`, and scores every state against the matching true frame.
pub fn run(
    weights: &WeightMatrix,
    conn: &ConnectivityMap,
    input: &[Pixel],
    truth: &Movie,
    start_index: usize,
    horizon: usize,
) -> Result<RetrievalTrace> {
    check_dims(weights, conn, input.len())?;
    if truth.pixel_count() != input.len() {
        return Err(AstmError::DimensionMismatch {
            what: "truth movie pixels",
            expected: input.len(),
            got: truth.pixel_count(),
        });
    }
    if horizon == 0 {
        return Err(AstmError::param("horizon", "must be at least 1"));
    }
    let mut stepper = Stepper::new(weights, conn);
    let mut state = to_f64(input);
    let mut next = vec![0.0; state.len()];
    let mut counts = Vec::with_capacity(horizon + 1);
    counts.push(wrong(&state, truth.frame(start_index)));
    for k in 1..=horizon {
        stepper.advance(&state, &mut next);
        std::mem::swap(&mut state, &mut next);
        counts.push(wrong(&state, truth.frame(start_index + k)));
    }
    Ok(RetrievalTrace::new(counts, input.len()))
}

/// Adds i.i.d. `N(0, (r * rms(W))^2)` noise to every weight.
pub fn perturb_weights(weights: &WeightMatrix, r: f64, seed: u64) -> Result<WeightMatrix> {
    if !(r >= 0.0) {
        return Err(AstmError::param("r", format!("{r} must be >= 0")));
    }
    let mut out = weights.clone();
    if r == 0.0 {
        return Ok(out);
    }
    let sigma = r * weights.rms();
    let mut rng = rng::seeded(seed);
    for w in out.as_mut_slice() {
        let xi: f64 = StandardNormal.sample(&mut rng);
        *w += sigma * xi;
    }
    Ok(out)
}
