//! Fast invariant suite behind `astm selftest`.
//!
//! Each check is small enough to run in well under a second and is written
//! against an independent reference: brute-force enumeration, direct
//! quadrature or plain Hamming distance.

use rand::Rng;

use crate::analytics::hebb_pixel_error;
use crate::lattice::{hamming, random_movie, ConnectivityMap, LatticeConfig, Movie, Pixel};
use crate::linalg::sgn;
use crate::recording::{
    record, train_row_active_set, train_row_hildreth, DiscreteParams, Method, QpParams, QpSolver,
    RowProblem,
};
use crate::rng;
use crate::tcam;

const SEED: u64 = 0x5e1f_7e57;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Check { name, pass, detail }
    }
}

/// Runs every check in a fixed order.
pub fn run() -> Vec<Check> {
    vec![
        connectivity_symmetry(),
        hebb_integer_lattice(),
        qp_tiny_oracle(),
        dgd_margin(),
        hebb_quadrature(),
        tcam_hamming(),
    ]
}

/// `true` when every cell lists distinct neighbours other than itself and
/// the relation is symmetric.
pub fn connectivity_is_valid(conn: &ConnectivityMap) -> bool {
    let distinct = (0..conn.cell_count()).all(|i| {
        let mut v = conn.neighbors(i).to_vec();
        v.sort_unstable();
        v.dedup();
        v.len() == conn.arity() && v.binary_search(&(i as u32)).is_err()
    });
    distinct && conn.is_symmetric()
}

fn connectivity_symmetry() -> Check {
    let mut cases = 0;
    let mut bad = Vec::new();
    for side in 1..=11usize {
        for window in (1..=side).step_by(2) {
            let cfg = match LatticeConfig::new(side, window) {
                Ok(c) => c,
                Err(_) => continue,
            };
            cases += 1;
            if !connectivity_is_valid(&ConnectivityMap::build(&cfg)) {
                bad.push(format!("L={side} m={window}"));
            }
        }
    }
    Check::new(
        "connectivity-symmetry",
        bad.is_empty(),
        format!("{cases} lattices, failures: [{}]", bad.join(", ")),
    )
}

fn hebb_integer_lattice() -> Check {
    let cfg = LatticeConfig::new(9, 5).unwrap();
    let conn = ConnectivityMap::build(&cfg);
    let mut checked = 0;
    let mut bad = 0;
    for (k, frames) in [1usize, 2, 7, 30].into_iter().enumerate() {
        let movie = random_movie(cfg.cell_count(), frames, 0.5, SEED + k as u64).unwrap();
        let (w, _) = record(&movie, &conn, &Method::Hebb, crate::Exec::Sequential).unwrap();
        let q = frames as i64;
        for &v in w.as_slice() {
            // Q w is a sum of Q terms of +-1
            let scaled = v * frames as f64;
            let n = scaled.round() as i64;
            checked += 1;
            if scaled != n as f64 || n.abs() > q || (n - q).rem_euclid(2) != 0 {
                bad += 1;
            }
        }
    }
    Check::new(
        "hebb-integer-lattice",
        bad == 0,
        format!("{checked} weights, {bad} off the lattice"),
    )
}

/// Minimum-norm `w` subject to `x_q . w >= margin` by enumerating every
/// candidate active set. `None` when no candidate is feasible.
pub fn qp_bruteforce(problem: &RowProblem, margin: f64) -> Option<Vec<f64>> {
    let m = problem.arity();
    let q = problem.transitions();
    assert!(q <= 16, "enumeration is for tiny instances");
    let rows: Vec<Vec<f64>> = (0..q)
        .map(|k| {
            problem
                .input(k)
                .iter()
                .map(|x| x * problem.target(k))
                .collect()
        })
        .collect();
    let mut best: Option<Vec<f64>> = None;
    for mask in 0u32..(1 << q) {
        let active: Vec<usize> = (0..q).filter(|k| mask >> k & 1 == 1).collect();
        let n = active.len();
        let mut gram = vec![0.0; n * n];
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                gram[a * n + b] = rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y).sum();
            }
        }
        let Some(mu) = gauss_solve(gram, vec![margin; n]) else {
            continue;
        };
        if mu.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; m];
        for (a, &i) in active.iter().enumerate() {
            for (wj, x) in w.iter_mut().zip(&rows[i]) {
                *wj += mu[a] * x;
            }
        }
        let feasible = rows
            .iter()
            .all(|r| r.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() >= margin - 1e-9);
        if !feasible {
            continue;
        }
        let norm: f64 = w.iter().map(|v| v * v).sum();
        let better = best
            .as_ref()
            .is_none_or(|b| norm < b.iter().map(|v| v * v).sum::<f64>() - 1e-12);
        if better {
            best = Some(w);
        }
    }
    best
}

/// Gaussian elimination with partial pivoting; `None` for singular systems.
fn gauss_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-10 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i * n + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Some(x)
}

/// A random `+-1` row problem with `arity` inputs and `transitions` targets.
pub fn random_row<R: Rng>(rng: &mut R, arity: usize, transitions: usize) -> RowProblem {
    let mut pm = |_| if rng.random::<bool>() { 1.0 } else { -1.0 };
    let inputs: Vec<f64> = (0..arity * transitions).map(&mut pm).collect();
    let targets: Vec<f64> = (0..transitions).map(&mut pm).collect();
    RowProblem::from_parts(arity, inputs, targets).unwrap()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn qp_tiny_oracle() -> Check {
    let mut rng = rng::seeded(SEED);
    let mut feasible = 0;
    let mut infeasible = 0;
    let mut worst = 0.0f64;
    let mut wrong_sign = 0;
    let mut flagged = 0;
    let hildreth = QpParams {
        solver: QpSolver::Hildreth,
        max_iters: 20_000,
        ..Default::default()
    };
    let active = QpParams::default();
    while feasible < 50 {
        let m = rng.random_range(2..=8);
        let q = rng.random_range(1..=4);
        let p = random_row(&mut rng, m, q);
        let a = train_row_active_set(&p, &active);
        match qp_bruteforce(&p, 1.0) {
            None => {
                infeasible += 1;
                if a.converged {
                    flagged += 1;
                }
            }
            Some(w) => {
                feasible += 1;
                let h = train_row_hildreth(&p, &hildreth);
                if !a.converged || !h.converged {
                    flagged += 1;
                }
                worst = worst
                    .max(distance(&a.weights, &w))
                    .max(distance(&h.weights, &w));
                wrong_sign += (0..q)
                    .filter(|&k| sgn(p.drive(&a.weights, k)) != p.target(k))
                    .count();
            }
        }
    }
    Check::new(
        "qp-tiny-oracle",
        worst <= 1e-6 && wrong_sign == 0 && flagged == 0,
        format!(
            "{feasible} feasible, {infeasible} infeasible, max distance {worst:e}, \
             sign errors {wrong_sign}, convergence mismatches {flagged}"
        ),
    )
}

/// Trains integer instances (`eta = 1/2`, `D = 1`, so every weight and
/// drive is an exact integer) with `sign` and compares the trainer's verdict
/// against the stop condition of the reference `sgn`: the rule is idle on a
/// transition iff `s = +1, h >= D` or `s = -1, h < -D`. Converged rows must
/// also satisfy `s h >= D`. Returns the number of offending rows.
pub fn dgd_margin_mismatches(
    sign: impl Fn(f64) -> f64 + Copy,
    instances: usize,
    seed: u64,
) -> usize {
    let params = DiscreteParams {
        eta: 0.5,
        margin: 1.0,
        max_epochs: 10_000,
    };
    let mut rng = rng::seeded(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let m = rng.random_range(4..=24);
        let q = rng.random_range(1..=(4 * m) / 5);
        let p = random_row(&mut rng, m, q);
        let out = crate::recording::train_row_discrete_with_sign(&p, &vec![0.0; m], &params, sign);
        let idle = (0..q).all(|k| {
            let h = p.drive(&out.weights, k);
            let d = params.margin;
            if p.target(k) > 0.0 {
                h >= d
            } else {
                h < -d
            }
        });
        let margin_ok = (0..q).all(|k| p.target(k) * p.drive(&out.weights, k) >= params.margin);
        if out.converged != idle || (out.converged && !margin_ok) {
            bad += 1;
        }
    }
    bad
}

fn dgd_margin() -> Check {
    let bad = dgd_margin_mismatches(sgn, 200, SEED);
    Check::new(
        "dgd-margin",
        bad == 0,
        format!("200 integer instances, {bad} verdict mismatches"),
    )
}

/// `(1/sqrt(2 pi)) int_x^inf exp(-t^2/2) dt` by composite Simpson, with the
/// `exp(-x^2/2)` factor pulled out so deep tails keep full relative accuracy.
pub fn gaussian_tail_simpson(x: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let upper = -x + (x * x + 100.0).sqrt();
    let h = upper / n as f64;
    let f = |u: f64| (-x * u - 0.5 * u * u).exp();
    let mut s = f(0.0) + f(upper);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    (-0.5 * x * x).exp() * s * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn hebb_quadrature() -> Check {
    let mut worst = 0.0f64;
    for m in [8.0f64, 24.0, 48.0, 120.0, 440.0, 960.0] {
        for ratio in [0.02, 0.05, 0.1, 0.14, 0.18, 0.25, 0.5, 1.0, 2.0, 4.0] {
            let q = (m * ratio).max(1.0);
            let closed = hebb_pixel_error(m, q);
            let quad = gaussian_tail_simpson((m / q).sqrt(), 4000);
            worst = worst.max(((closed - quad) / quad).abs());
        }
    }
    Check::new(
        "hebb-quadrature",
        worst <= 1e-8,
        format!("max relative deviation {worst:e}"),
    )
}

fn min_hamming_row(movie: &Movie, probe: &[Pixel]) -> usize {
    let mut best = 0;
    let mut best_d = usize::MAX;
    for (k, row) in movie.frames().enumerate() {
        let d = hamming(row, probe);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

fn tcam_hamming() -> Check {
    let mut rng = rng::seeded(SEED);
    let mut cases = 0;
    let mut bad = 0;
    for _ in 0..300 {
        let n = rng.random_range(4..=40);
        let q = rng.random_range(1..=6);
        let movie = random_movie(n, q, 0.5, rng.random()).unwrap();
        let probe: Vec<Pixel> = (0..n).map(|_| if rng.random() { 1 } else { -1 }).collect();
        let expect = min_hamming_row(&movie, &probe);
        for g_off in [0.0, 0.1] {
            let bank = tcam::store(&movie, 1.0, g_off, 0.0).unwrap();
            cases += 1;
            if tcam::match_frame(&bank, &probe, 0).unwrap().0 != expect {
                bad += 1;
            }
        }
    }
    Check::new(
        "tcam-hamming",
        bad == 0,
        format!("{cases} probes, {bad} disagreements"),
    )
}
