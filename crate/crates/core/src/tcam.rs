//! Memristive ternary CAM baseline.
//!
//! Each stored frame is one row of complementary device pairs. A probe
//! discharges every row at a rate equal to the summed conductance of the
//! devices it drives: a mismatching cell leaks through its ON device, a
//! matching one through its OFF device. The comparator picks the slowest
//! row; ties go to the lowest index.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AstmError, Result};
use crate::lattice::{flip_pixels, random_movie, Movie, Pixel};
use crate::par::Exec;
use crate::rng;
use crate::stats::Estimate;

/// Output amplitude; rates scale linearly with it.
pub const V0: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TcamBank {
    pixels: usize,
    rows: Vec<Pixel>,
    pub g_on: f64,
    pub g_off: f64,
    /// Relative spread of each conductance draw.
    pub sigma_g: f64,
}

impl TcamBank {
    pub fn pixel_count(&self) -> usize {
        self.pixels
    }

    pub fn row_count(&self) -> usize {
        self.rows.len() / self.pixels
    }

    pub fn row(&self, k: usize) -> &[Pixel] {
        &self.rows[k * self.pixels..(k + 1) * self.pixels]
    }

    /// Two devices per stored bit, `2 N Q`.
    pub fn memristor_count(&self) -> usize {
        2 * self.rows.len()
    }
}

pub fn store(movie: &Movie, g_on: f64, g_off: f64, sigma_g: f64) -> Result<TcamBank> {
    if !(g_off >= 0.0 && g_on > g_off) {
        return Err(AstmError::param(
            "conductance",
            format!("need g_on > g_off >= 0, got g_on={g_on} g_off={g_off}"),
        ));
    }
    if !(sigma_g >= 0.0) {
        return Err(AstmError::param(
            "sigma_g",
            format!("{sigma_g} must be >= 0"),
        ));
    }
    Ok(TcamBank {
        pixels: movie.pixel_count(),
        rows: movie.frames().flatten().copied().collect(),
        g_on,
        g_off,
        sigma_g,
    })
}

/// Standard normal truncated to `[-4, 4]` by rejection.
fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let xi: f64 = StandardNormal.sample(rng);
        if xi.abs() <= 4.0 {
            return xi;
        }
    }
}

fn argmin(rates: &[f64]) -> usize {
    let mut best = 0;
    for (k, &r) in rates.iter().enumerate().skip(1) {
        if r < rates[best] {
            best = k;
        }
    }
    best
}

fn check_probe(bank: &TcamBank, probe: &[Pixel]) -> Result<()> {
    if probe.len() != bank.pixels {
        return Err(AstmError::DimensionMismatch {
            what: "probe pixels",
            expected: bank.pixels,
            got: probe.len(),
        });
    }
    Ok(())
}

/// Matches `probe` against every row; returns the selected row and all
/// discharge rates.
pub fn match_frame(bank: &TcamBank, probe: &[Pixel], seed: u64) -> Result<(usize, Vec<f64>)> {
    check_probe(bank, probe)?;
    let mut rates = Vec::with_capacity(bank.row_count());
    if bank.sigma_g == 0.0 {
        for k in 0..bank.row_count() {
            let h = crate::lattice::hamming(bank.row(k), probe) as f64;
            let misses = (bank.pixels as f64) - h;
            rates.push(V0 * (h * bank.g_on + misses * bank.g_off));
        }
    } else {
        let mut rng = rng::seeded(seed);
        for k in 0..bank.row_count() {
            let mut rate = 0.0;
            for (a, b) in bank.row(k).iter().zip(probe) {
                let g = if a == b { bank.g_off } else { bank.g_on };
                rate += g * (1.0 + bank.sigma_g * truncated_normal(&mut rng));
            }
            rates.push(V0 * rate);
        }
    }
    Ok((argmin(&rates), rates))
}

/// Device conductances drawn uniformly inside hard bounds, for worst-case
/// studies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConductanceBounds {
    pub on: (f64, f64),
    pub off: (f64, f64),
}

pub fn match_bounded(
    bank: &TcamBank,
    probe: &[Pixel],
    bounds: &ConductanceBounds,
    seed: u64,
) -> Result<(usize, Vec<f64>)> {
    check_probe(bank, probe)?;
    let mut rng = rng::seeded(seed);
    let mut rates = Vec::with_capacity(bank.row_count());
    for k in 0..bank.row_count() {
        let mut rate = 0.0;
        for (a, b) in bank.row(k).iter().zip(probe) {
            let (lo, hi) = if a == b { bounds.off } else { bounds.on };
            rate += if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
        }
        rates.push(V0 * rate);
    }
    Ok((argmin(&rates), rates))
}

/// Conductance model for [`retrieval_error_mc_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceModel {
    pub g_on: f64,
    pub g_off: f64,
    pub sigma_g: f64,
}

impl DeviceModel {
    /// `sigma_g = 0`, `g_off = 0`: exact minimum-Hamming matching.
    pub const IDEAL: DeviceModel = DeviceModel {
        g_on: 1.0,
        g_off: 0.0,
        sigma_g: 0.0,
    };
}

/// Monte Carlo probability that a probe made from frame 1 of a fresh random
/// movie, with `round(f N)` flipped pixels, selects a wrong row of an ideal
/// bank.
pub fn retrieval_error_mc(
    pixels: usize,
    frames: usize,
    fraction: f64,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    retrieval_error_mc_with(
        pixels,
        frames,
        fraction,
        trials,
        DeviceModel::IDEAL,
        seed,
        Exec::default(),
    )
}

pub fn retrieval_error_mc_with(
    pixels: usize,
    frames: usize,
    fraction: f64,
    trials: usize,
    device: DeviceModel,
    seed: u64,
    exec: Exec,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(AstmError::param("trials", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(AstmError::param(
            "flip fraction",
            format!("{fraction} not in [0, 1]"),
        ));
    }
    let outcomes = exec.map(0..trials, |t| -> Result<bool> {
        let mut stream = rng::stream(seed, t as u64);
        let movie = random_movie(pixels, frames, 0.5, stream.random())?;
        let bank = store(&movie, device.g_on, device.g_off, device.sigma_g)?;
        let probe = flip_pixels(movie.frame(0), fraction, stream.random())?;
        let (k, _) = match_frame(&bank, &probe, stream.random())?;
        Ok(k != 0)
    });
    let mut errors = 0u64;
    for o in outcomes {
        errors += o? as u64;
    }
    Ok(Estimate::new(errors, trials as u64))
}
