//! Monte Carlo experiment driver.
//!
//! A trial is a fresh random movie, a fresh recording, optional weight
//! noise, a corrupted copy of frame 1 as input and one retrieval run. Trial
//! `t` takes all of its seeds from `rng::stream(master_seed, t)` and trials
//! are fanned out through [`Exec`], so every estimate is independent of the
//! worker count.

use rand::Rng;

use crate::analytics;
use crate::error::{AstmError, Result};
use crate::fmt_prob;
use crate::lattice::{flip_pixels, random_movie, ConnectivityMap, LatticeConfig, Movie};
use crate::par::Exec;
use crate::recording::{record, Method, WeightMatrix};
use crate::retrieval::{perturb_weights, run, Status, Stepper};
use crate::rng;
use crate::stats::{within_combined, Estimate};

/// How trials obtain their weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrialMode {
    /// Fresh movie and recording per trial.
    #[default]
    Fresh,
    /// One movie recorded once (from stream `u64::MAX`); trials draw only
    /// input and weight noise.
    SharedRecording,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    pub method: Method,
    /// Frames per movie, `Q`.
    pub frames: usize,
    pub duty: f64,
    /// Input flip fraction `f`.
    pub flip: f64,
    /// Relative weight noise `r`.
    pub weight_noise: f64,
    pub trials: usize,
    pub master_seed: u64,
    /// Retrieval steps; `None` means one full cycle, `Q`.
    pub horizon: Option<usize>,
    pub mode: TrialMode,
    /// First batch size when a probe may stop early; later batches double.
    pub batch: usize,
    pub exec: Exec,
}

impl ExperimentConfig {
    pub fn new(
        lattice: LatticeConfig,
        method: Method,
        frames: usize,
        trials: usize,
        master_seed: u64,
    ) -> Self {
        ExperimentConfig {
            lattice,
            method,
            frames,
            duty: 0.5,
            flip: 0.0,
            weight_noise: 0.0,
            trials,
            master_seed,
            horizon: None,
            mode: TrialMode::Fresh,
            batch: 4,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(AstmError::param("trials", "must be at least 1"));
        }
        if self.frames == 0 {
            return Err(AstmError::param("frames", "must be at least 1"));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(AstmError::param(
                "duty",
                format!("{} not in (0, 1)", self.duty),
            ));
        }
        if !(0.0..=1.0).contains(&self.flip) {
            return Err(AstmError::param(
                "flip",
                format!("{} not in [0, 1]", self.flip),
            ));
        }
        if !(self.weight_noise >= 0.0) {
            return Err(AstmError::param(
                "weight-noise",
                format!("{} must be >= 0", self.weight_noise),
            ));
        }
        if self.horizon == Some(0) {
            return Err(AstmError::param("horizon", "must be at least 1"));
        }
        if self.batch == 0 {
            return Err(AstmError::param("batch", "must be at least 1"));
        }
        self.method.validate()
    }

    fn horizon(&self) -> usize {
        self.horizon.unwrap_or(self.frames)
    }

    fn with_frames(&self, frames: usize) -> Self {
        ExperimentConfig {
            frames,
            ..self.clone()
        }
    }
}

/// Recording shared by every trial in [`TrialMode::SharedRecording`].
struct Shared {
    movie: Movie,
    weights: WeightMatrix,
}

fn shared_recording(cfg: &ExperimentConfig, conn: &ConnectivityMap) -> Result<Option<Shared>> {
    if cfg.mode != TrialMode::SharedRecording {
        return Ok(None);
    }
    let mut stream = rng::stream(cfg.master_seed, u64::MAX);
    let movie = random_movie(
        cfg.lattice.cell_count(),
        cfg.frames,
        cfg.duty,
        stream.random(),
    )?;
    let (weights, _) = record(&movie, conn, &cfg.method, cfg.exec)?;
    Ok(Some(Shared { movie, weights }))
}

/// One trial; `true` when the retrieval ends corrupted.
fn corruption_trial(
    cfg: &ExperimentConfig,
    conn: &ConnectivityMap,
    shared: Option<&Shared>,
    t: usize,
) -> Result<bool> {
    let mut stream = rng::stream(cfg.master_seed, t as u64);
    let movie_seed: u64 = stream.random();
    let noise_seed: u64 = stream.random();
    let flip_seed: u64 = stream.random();
    let fresh;
    let (movie, weights) = match shared {
        Some(s) => (&s.movie, &s.weights),
        None => {
            let movie = random_movie(cfg.lattice.cell_count(), cfg.frames, cfg.duty, movie_seed)?;
            let (weights, _) = record(&movie, conn, &cfg.method, Exec::Sequential)?;
            fresh = (movie, weights);
            (&fresh.0, &fresh.1)
        }
    };
    let noisy;
    let weights = if cfg.weight_noise > 0.0 {
        noisy = perturb_weights(weights, cfg.weight_noise, noise_seed)?;
        &noisy
    } else {
        weights
    };
    let input = flip_pixels(movie.frame(0), cfg.flip, flip_seed)?;
    let trace = run(weights, conn, &input, movie, 0, cfg.horizon())?;
    Ok(trace.status == Status::Corrupted)
}

/// Fraction of corrupted retrievals over `cfg.trials` trials.
pub fn corruption_prob(cfg: &ExperimentConfig) -> Result<Estimate> {
    corruption_until(cfg, None)
}

/// As [`corruption_prob`], but processes trials in batches of `cfg.batch`,
/// `2 cfg.batch`, `4 cfg.batch`, ... and stops after the first batch that
/// pushes the corrupted count above `limit`. The verdict `events > limit` is
/// the same as for the full run; the returned estimate covers only the
/// trials run.
pub fn corruption_until(cfg: &ExperimentConfig, limit: Option<u64>) -> Result<Estimate> {
    cfg.validate()?;
    let conn = ConnectivityMap::build(&cfg.lattice);
    let shared = shared_recording(cfg, &conn)?;
    let mut batch = if limit.is_some() {
        cfg.batch
    } else {
        cfg.trials
    };
    let mut events = 0u64;
    let mut done = 0usize;
    while done < cfg.trials {
        let end = (done + batch).min(cfg.trials);
        batch *= 2;
        let outcomes = cfg.exec.map(done..end, |t| {
            corruption_trial(cfg, &conn, shared.as_ref(), t)
        });
        for o in outcomes {
            events += o? as u64;
        }
        done = end;
        if limit.is_some_and(|l| events > l) {
            break;
        }
    }
    Ok(Estimate::new(events, done as u64))
}

/// Sample mean with the standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        if samples.is_empty() {
            return MeanEstimate {
                mean: 0.0,
                stderr: 0.0,
                trials: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr: (var / n).sqrt(),
            trials: samples.len() as u64,
        }
    }
}

/// Stationary per-pixel error of Hebb recording: from a clean frame 1, run
/// `2Q` steps and average the wrong-pixel fraction over the last `Q`. The
/// standard error is taken across movies.
pub fn equilibrium_error(cfg: &ExperimentConfig) -> Result<MeanEstimate> {
    cfg.validate()?;
    if cfg.method != Method::Hebb {
        return Err(AstmError::UnsupportedMethod {
            operation: "equilibrium error",
            method: cfg.method.name().to_string(),
        });
    }
    let conn = ConnectivityMap::build(&cfg.lattice);
    let q = cfg.frames;
    let n = cfg.lattice.cell_count();
    let samples = cfg.exec.map(0..cfg.trials, |t| -> Result<f64> {
        let mut stream = rng::stream(cfg.master_seed, t as u64);
        let movie = random_movie(n, q, cfg.duty, stream.random())?;
        let (weights, _) = record(&movie, &conn, &Method::Hebb, Exec::Sequential)?;
        let mut stepper = Stepper::new(&weights, &conn);
        let mut state: Vec<f64> = movie.frame(0).iter().map(|&s| s as f64).collect();
        let mut next = vec![0.0; n];
        let mut wrong = 0usize;
        for k in 1..=2 * q {
            stepper.advance(&state, &mut next);
            std::mem::swap(&mut state, &mut next);
            if k > q {
                let truth = movie.frame(k);
                wrong += state
                    .iter()
                    .zip(truth)
                    .filter(|(&a, &b)| a != b as f64)
                    .count();
            }
        }
        Ok(wrong as f64 / (q * n) as f64)
    });
    let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(MeanEstimate::from_samples(&samples))
}

/// One point visited by the capacity search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub frames: usize,
    pub estimate: f64,
    pub stderr: f64,
    /// Trials actually run.
    pub trials: u64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Capacity {
    /// Largest probed `Q` with estimate at or below the target.
    pub q_max: usize,
    /// `(q_max, smallest failing Q)`; the upper end is `4M` (unprobed) when
    /// every probe passed.
    pub bracket: (usize, usize),
    /// Probes in visiting order.
    pub probes: Vec<Probe>,
    /// Whether estimates are non-decreasing in `Q` within two combined
    /// standard errors.
    pub monotone: bool,
}

impl Capacity {
    pub fn probe_at(&self, frames: usize) -> Option<&Probe> {
        self.probes.iter().find(|p| p.frames == frames)
    }
}

fn probe(cfg: &ExperimentConfig, frames: usize, target_p: f64) -> Result<Probe> {
    let c = cfg.with_frames(frames);
    if cfg.method == Method::Hebb {
        let e = equilibrium_error(&c)?;
        return Ok(Probe {
            frames,
            estimate: e.mean,
            stderr: e.stderr,
            trials: e.trials,
            pass: e.mean <= target_p,
        });
    }
    let limit = (target_p * c.trials as f64).floor() as u64;
    let e = corruption_until(&c, Some(limit))?;
    Ok(Probe {
        frames,
        estimate: e.p(),
        stderr: e.stderr(),
        trials: e.trials,
        pass: e.events <= limit,
    })
}

/// Largest `Q` whose corruption probability (the equilibrium pixel error
/// for Hebb) stays at or below `target_p`, by bisection over `[1, 4M]`
/// until the bracket is at most `resolution` wide. `Q = 1` must pass; `4M`
/// is taken as failing without being probed.
pub fn capacity(cfg: &ExperimentConfig, target_p: f64, resolution: usize) -> Result<Capacity> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(AstmError::param(
            "target-p",
            format!("{target_p} not in (0, 1)"),
        ));
    }
    cfg.validate()?;
    let resolution = resolution.max(1);
    let mut probes = Vec::new();
    let first = probe(cfg, 1, target_p)?;
    probes.push(first);
    if !first.pass {
        return Err(AstmError::BracketFailure {
            p: first.estimate,
            target: target_p,
        });
    }
    let (mut lo, mut hi) = (1, 4 * cfg.lattice.connectivity());
    while hi - lo > resolution {
        let mid = lo + (hi - lo) / 2;
        let p = probe(cfg, mid, target_p)?;
        probes.push(p);
        if p.pass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let monotone = is_monotone(
        probes
            .iter()
            .map(|p| (p.frames as f64, p.estimate, p.stderr)),
        2.0,
    );
    Ok(Capacity {
        q_max: lo,
        bracket: (lo, hi),
        probes,
        monotone,
    })
}

/// True when `(x, estimate, stderr)` points, sorted by `x`, never drop by
/// more than `k` combined standard errors between neighbours.
pub fn is_monotone(points: impl IntoIterator<Item = (f64, f64, f64)>, k: f64) -> bool {
    let mut pts: Vec<_> = points.into_iter().collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2)
        .all(|w| w[1].1 >= w[0].1 || within_combined(w[0].1, w[0].2, w[1].1, w[1].2, k))
}

/// Linearly interpolated `x` where the estimate first reaches `level`, on
/// points sorted by `x`. `None` if it never does.
pub fn crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.first()?.1 >= level {
        return Some(pts[0].0);
    }
    pts.windows(2).find(|w| w[1].1 >= level).map(|w| {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub experiment: String,
    pub method: String,
    pub lattice: LatticeConfig,
    pub frames: usize,
    pub duty: f64,
    pub flip: f64,
    pub weight_noise: f64,
    pub trials: u64,
    pub estimate: f64,
    pub stderr: f64,
}

impl SweepRow {
    fn new(
        experiment: &str,
        cfg: &ExperimentConfig,
        estimate: f64,
        stderr: f64,
        trials: u64,
    ) -> Self {
        SweepRow {
            experiment: experiment.to_string(),
            method: cfg.method.name().to_string(),
            lattice: cfg.lattice,
            frames: cfg.frames,
            duty: cfg.duty,
            flip: cfg.flip,
            weight_noise: cfg.weight_noise,
            trials,
            estimate,
            stderr,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub master_seed: u64,
    pub version: &'static str,
    /// Extra `key=value` pairs for the manifest line.
    pub manifest: Vec<(String, String)>,
}

pub const CSV_HEADER: &str = "experiment,method,L,m,N,M,Q,d,f,r,trials,estimate,stderr,master_seed";

impl SweepResult {
    fn new(master_seed: u64) -> Self {
        SweepResult {
            rows: Vec::new(),
            master_seed,
            version: env!("CARGO_PKG_VERSION"),
            manifest: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# tool=astm version={} master_seed={}",
            self.version, self.master_seed
        );
        for (k, v) in &self.manifest {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let l = &r.lattice;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.experiment,
                r.method,
                l.side(),
                l.window(),
                l.cell_count(),
                l.connectivity(),
                r.frames,
                r.duty,
                r.flip,
                r.weight_noise,
                r.trials,
                fmt_prob(r.estimate),
                fmt_prob(r.stderr),
                self.master_seed
            ));
        }
        out
    }
}

fn capacity_rows(result: &mut SweepResult, cfg: &ExperimentConfig, cap: &Capacity) {
    let at = |q: usize| cap.probe_at(q).copied();
    if let Some(p) = at(cap.bracket.0) {
        let c = cfg.with_frames(p.frames);
        result.rows.push(SweepRow::new(
            "capacity", &c, p.estimate, p.stderr, p.trials,
        ));
    }
    if let Some(p) = at(cap.bracket.1) {
        let c = cfg.with_frames(p.frames);
        result.rows.push(SweepRow::new(
            "capacity-fail",
            &c,
            p.estimate,
            p.stderr,
            p.trials,
        ));
    }
}

/// Capacity search at one configuration, as a one-point sweep.
pub fn capacity_sweep(
    cfg: &ExperimentConfig,
    target_p: f64,
    resolution: usize,
) -> Result<(SweepResult, Capacity)> {
    let cap = capacity(cfg, target_p, resolution)?;
    let mut result = SweepResult::new(cfg.master_seed);
    result
        .manifest
        .push(("target_p".into(), target_p.to_string()));
    capacity_rows(&mut result, cfg, &cap);
    Ok((result, cap))
}

/// `Q_max(d) = Q_max(1/2) * sqrt(0.25 / (d (1 - d)))`
pub fn duty_reference(q_half: f64, duty: f64) -> f64 {
    q_half * (0.25 / (duty * (1.0 - duty))).sqrt()
}

/// Capacity at each duty cycle, plus the reference law anchored at the
/// measured `Q_max(0.5)` (experiment `duty-reference`, `Q` rounded, the
/// unrounded ratio in `estimate`).
pub fn duty_sweep(
    cfg: &ExperimentConfig,
    d_values: &[f64],
    target_p: f64,
    resolution: usize,
) -> Result<(SweepResult, Vec<(f64, Capacity)>)> {
    if !matches!(cfg.method, Method::DiscreteGd(_)) {
        return Err(AstmError::UnsupportedMethod {
            operation: "duty sweep",
            method: cfg.method.name().to_string(),
        });
    }
    let mut ds: Vec<f64> = d_values.to_vec();
    if !ds.contains(&0.5) {
        ds.push(0.5);
    }
    let mut caps = Vec::new();
    for &d in &ds {
        let c = ExperimentConfig {
            duty: d,
            ..cfg.clone()
        };
        caps.push((d, capacity(&c, target_p, resolution)?));
    }
    let q_half = caps
        .iter()
        .find(|(d, _)| *d == 0.5)
        .map(|(_, c)| c.q_max as f64)
        .unwrap_or(0.0);
    let mut result = SweepResult::new(cfg.master_seed);
    result
        .manifest
        .push(("target_p".into(), target_p.to_string()));
    for (d, cap) in &caps {
        let c = ExperimentConfig {
            duty: *d,
            ..cfg.clone()
        };
        capacity_rows(&mut result, &c, cap);
        let reference = duty_reference(q_half, *d);
        let mut row = SweepRow::new(
            "duty-reference",
            &c.with_frames(reference.round() as usize),
            reference / q_half.max(1.0),
            0.0,
            0,
        );
        row.estimate = (0.25 / (d * (1.0 - d))).sqrt();
        result.rows.push(row);
    }
    Ok((result, caps))
}

/// Corruption probability at each input flip fraction.
pub fn noise_sweep(cfg: &ExperimentConfig, f_values: &[f64]) -> Result<SweepResult> {
    let mut result = SweepResult::new(cfg.master_seed);
    for &f in f_values {
        let c = ExperimentConfig {
            flip: f,
            ..cfg.clone()
        };
        let e = corruption_prob(&c)?;
        result
            .rows
            .push(SweepRow::new("noise", &c, e.p(), e.stderr(), e.trials));
    }
    Ok(result)
}

/// Corruption probability at each relative weight-noise level.
pub fn weight_noise_sweep(cfg: &ExperimentConfig, r_values: &[f64]) -> Result<SweepResult> {
    let mut result = SweepResult::new(cfg.master_seed);
    for &r in r_values {
        let c = ExperimentConfig {
            weight_noise: r,
            ..cfg.clone()
        };
        let e = corruption_prob(&c)?;
        result.rows.push(SweepRow::new(
            "weight-noise",
            &c,
            e.p(),
            e.stderr(),
            e.trials,
        ));
    }
    Ok(result)
}

/// Equilibrium Hebb error next to its closed form.
pub fn equilibrium_sweep(cfg: &ExperimentConfig, q_values: &[usize]) -> Result<SweepResult> {
    let mut result = SweepResult::new(cfg.master_seed);
    let m = cfg.lattice.connectivity() as f64;
    for &q in q_values {
        let c = cfg.with_frames(q);
        let e = equilibrium_error(&c)?;
        result
            .rows
            .push(SweepRow::new("equilibrium", &c, e.mean, e.stderr, e.trials));
        let mut row = SweepRow::new(
            "equilibrium-analytic",
            &c,
            analytics::hebb_pixel_error(m, q as f64),
            0.0,
            0,
        );
        row.method = "hebb".into();
        result.rows.push(row);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::DiscreteParams;

    fn small(method: Method, frames: usize) -> ExperimentConfig {
        ExperimentConfig::new(LatticeConfig::new(9, 5).unwrap(), method, frames, 20, 3)
    }

    #[test]
    fn easy_dgd_never_corrupts() {
        let cfg = small(Method::DiscreteGd(DiscreteParams::default()), 6);
        assert_eq!(corruption_prob(&cfg).unwrap().events, 0);
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let mut cfg = small(Method::Hebb, 8);
        cfg.flip = 0.05;
        let mut seen = Vec::new();
        for exec in [Exec::Sequential, Exec::Parallel, Exec::Threads(3)] {
            cfg.exec = exec;
            seen.push((
                corruption_prob(&cfg).unwrap(),
                equilibrium_error(&cfg).unwrap(),
            ));
        }
        assert!(seen.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_frame_equilibrium_is_exact() {
        let e = equilibrium_error(&small(Method::Hebb, 1)).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn equilibrium_requires_hebb() {
        let cfg = small(Method::DiscreteGd(DiscreteParams::default()), 4);
        assert!(matches!(
            equilibrium_error(&cfg),
            Err(AstmError::UnsupportedMethod { .. })
        ));
    }

    #[test]
    fn early_stop_keeps_the_verdict() {
        let mut cfg = small(Method::Hebb, 30);
        cfg.trials = 40;
        let full = corruption_prob(&cfg).unwrap();
        let part = corruption_until(&cfg, Some(2)).unwrap();
        assert_eq!(full.events > 2, part.events > 2);
        assert!(part.trials <= full.trials);
    }

    #[test]
    fn capacity_bracket_is_consistent() {
        let dgd = DiscreteParams {
            max_epochs: 300,
            ..Default::default()
        };
        let cfg = small(Method::DiscreteGd(dgd), 1);
        let cap = capacity(&cfg, 0.05, 1).unwrap();
        assert_eq!(cap.bracket.0, cap.q_max);
        assert_eq!(cap.bracket.1 - cap.bracket.0, 1);
        assert!(cap.probe_at(cap.bracket.0).unwrap().pass);
        assert!(!cap.probe_at(cap.bracket.1).unwrap().pass);
        assert!(cap.monotone);
    }

    #[test]
    fn crossing_interpolates() {
        let pts = [(0.0, 0.0), (1.0, 0.2), (2.0, 0.6), (3.0, 1.0)];
        assert!((crossing(&pts, 0.5).unwrap() - 1.75).abs() < 1e-12);
        assert_eq!(crossing(&pts, 2.0), None);
    }

    #[test]
    fn csv_layout() {
        let cfg = small(Method::Hebb, 2);
        let r = equilibrium_sweep(&cfg, &[1]).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# tool=astm"));
        assert_eq!(lines[1], CSV_HEADER);
        assert!(lines[2].starts_with("equilibrium,hebb,9,5,81,24,1,0.5,0,0,20,0.00000000000e0,"));
        assert!(lines[2].ends_with(",3"));
    }
}
