//! Weight recording: turns a movie into an `N x M` weight matrix.
//!
//! Every recorder treats the movie as cyclic (frame `Q` is followed by frame
//! `1`), giving exactly `Q` transitions, and trains each cell's weight row
//! independently from the others. Rows are fanned out through [`Exec`] and
//! assembled in cell order.

mod analog;
mod discrete;
mod hebb;
mod qp;

pub use analog::train_row as train_row_analog;
pub use discrete::train_row as train_row_discrete;
pub(crate) use discrete::train_row_with_sign as train_row_discrete_with_sign;
pub use hebb::train_row as train_row_hebb;
pub use qp::train_row as train_row_qp;
pub use qp::{train_row_active_set, train_row_hildreth};

use crate::error::{AstmError, Result};
use crate::lattice::{ConnectivityMap, LatticeConfig, Movie};
use crate::linalg::{dot, rms};
use crate::par::Exec;

/// Synaptic weights, one row of `M` values per cell, aligned with the
/// [`ConnectivityMap`] neighbour order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    cells: usize,
    arity: usize,
    weights: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(cells: usize, arity: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cells * arity {
            return Err(AstmError::DimensionMismatch {
                what: "weights",
                expected: cells * arity,
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(AstmError::param("weight", format!("{w} is not finite")));
        }
        Ok(WeightMatrix {
            cells,
            arity,
            weights,
        })
    }

    pub fn zeros(cells: usize, arity: usize) -> Self {
        WeightMatrix {
            cells,
            arity,
            weights: vec![0.0; cells * arity],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        &self.weights[cell * self.arity..(cell + 1) * self.arity]
    }

    pub fn row_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.weights[cell * self.arity..(cell + 1) * self.arity]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn rms(&self) -> f64 {
        rms(&self.weights)
    }

    /// Header `W1 <L> <m>`, then one line per cell of `M` reals printed with
    /// 17 significant digits.
    pub fn to_text(&self, cfg: &LatticeConfig) -> Result<String> {
        if cfg.cell_count() != self.cells || cfg.connectivity() != self.arity {
            return Err(AstmError::DimensionMismatch {
                what: "weights for lattice",
                expected: cfg.cell_count() * cfg.connectivity(),
                got: self.weights.len(),
            });
        }
        let mut out = format!("W1 {} {}\n", cfg.side(), cfg.window());
        for row in self.weights.chunks_exact(self.arity) {
            let line: Vec<String> = row.iter().map(|w| format!("{w:.16e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_text(text: &str) -> Result<(LatticeConfig, WeightMatrix)> {
        const KIND: &str = "weight";
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| AstmError::format(KIND, 1, "empty file"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 3 || fields[0] != "W1" {
            return Err(AstmError::format(KIND, 1, "header must be `W1 <L> <m>`"));
        }
        let side: usize = fields[1]
            .parse()
            .map_err(|_| AstmError::format(KIND, 1, format!("bad L `{}`", fields[1])))?;
        let window: usize = fields[2]
            .parse()
            .map_err(|_| AstmError::format(KIND, 1, format!("bad m `{}`", fields[2])))?;
        let cfg = LatticeConfig::new(side, window)?;
        let (n, m) = (cfg.cell_count(), cfg.connectivity());
        let mut weights = Vec::with_capacity(n * m);
        for i in 0..n {
            let line_no = i + 2;
            let line = lines
                .next()
                .ok_or_else(|| AstmError::format(KIND, line_no, "missing weight row"))?;
            let before = weights.len();
            for tok in line.split(' ') {
                let w: f64 = tok
                    .parse()
                    .map_err(|_| AstmError::format(KIND, line_no, format!("bad weight `{tok}`")))?;
                if !w.is_finite() {
                    return Err(AstmError::format(KIND, line_no, "non-finite weight"));
                }
                weights.push(w);
            }
            if weights.len() - before != m {
                return Err(AstmError::format(
                    KIND,
                    line_no,
                    format!("expected {m} weights, found {}", weights.len() - before),
                ));
            }
        }
        if lines.any(|l| !l.is_empty()) {
            return Err(AstmError::format(
                KIND,
                n + 2,
                "unexpected trailing content",
            ));
        }
        Ok((cfg, WeightMatrix::new(n, m, weights)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecordingReport {
    pub converged: bool,
    /// Largest epoch (pass) count over all rows.
    pub epochs_used: usize,
    /// Transition constraints still failing the method's threshold.
    pub violations: usize,
    pub weight_rms: f64,
}

/// Per-row solver for the minimum-norm problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QpSolver {
    /// Exact dual active-set method.
    #[default]
    ActiveSet,
    /// Dual coordinate ascent; `max_iters` counts passes.
    Hildreth,
}

impl QpSolver {
    pub fn name(&self) -> &'static str {
        match self {
            QpSolver::ActiveSet => "active-set",
            QpSolver::Hildreth => "hildreth",
        }
    }

    pub fn from_name(name: &str) -> Option<QpSolver> {
        match name {
            "active-set" => Some(QpSolver::ActiveSet),
            "hildreth" => Some(QpSolver::Hildreth),
            _ => None,
        }
    }
}

/// Minimum-norm recording with margin constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpParams {
    pub margin: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub solver: QpSolver,
}

impl Default for QpParams {
    fn default() -> Self {
        QpParams {
            margin: 1.0,
            max_iters: 2000,
            tol: 1e-8,
            solver: QpSolver::default(),
        }
    }
}

/// Delta-rule recording.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalogParams {
    pub eta: f64,
    pub max_epochs: usize,
    pub eps_stop: f64,
}

impl Default for AnalogParams {
    fn default() -> Self {
        AnalogParams {
            eta: 1e-3,
            max_epochs: 100_000,
            eps_stop: 0.1,
        }
    }
}

/// Margin-shifted sign-error recording.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteParams {
    pub eta: f64,
    /// Margin parameter `D`.
    pub margin: f64,
    pub max_epochs: usize,
}

impl Default for DiscreteParams {
    fn default() -> Self {
        DiscreteParams {
            eta: 0.01,
            margin: 1.0,
            max_epochs: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Hebb,
    Qp(QpParams),
    AnalogGd(AnalogParams),
    DiscreteGd(DiscreteParams),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Hebb => "hebb",
            Method::Qp(_) => "qp",
            Method::AnalogGd(_) => "agd",
            Method::DiscreteGd(_) => "dgd",
        }
    }

    /// Method with default parameters from its short name.
    pub fn from_name(name: &str) -> Option<Method> {
        match name {
            "hebb" => Some(Method::Hebb),
            "qp" => Some(Method::Qp(QpParams::default())),
            "agd" => Some(Method::AnalogGd(AnalogParams::default())),
            "dgd" => Some(Method::DiscreteGd(DiscreteParams::default())),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Hebb => {}
            Method::Qp(p) => {
                if !(p.margin > 0.0) {
                    return Err(AstmError::param(
                        "margin",
                        format!("{} must be > 0", p.margin),
                    ));
                }
                if !(p.tol >= 0.0) {
                    return Err(AstmError::param("tol", format!("{} must be >= 0", p.tol)));
                }
            }
            Method::AnalogGd(p) => {
                if !(p.eta > 0.0) {
                    return Err(AstmError::param("eta", format!("{} must be > 0", p.eta)));
                }
            }
            Method::DiscreteGd(p) => {
                if !(p.eta > 0.0) {
                    return Err(AstmError::param("eta", format!("{} must be > 0", p.eta)));
                }
                if !(p.margin > 0.0) {
                    return Err(AstmError::param("D", format!("{} must be > 0", p.margin)));
                }
            }
        }
        Ok(())
    }
}

/// The `Q` transitions seen by one cell: input `q` is frame `q` gathered over
/// the cell's neighbours, target `q` is the cell's pixel in frame `q + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowProblem {
    arity: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl RowProblem {
    pub fn build(movie: &Movie, conn: &ConnectivityMap, cell: usize) -> Self {
        let q_count = movie.frame_count();
        let nbrs = conn.neighbors(cell);
        let mut inputs = Vec::with_capacity(q_count * nbrs.len());
        let mut targets = Vec::with_capacity(q_count);
        for q in 0..q_count {
            let frame = movie.frame(q);
            inputs.extend(nbrs.iter().map(|&j| frame[j as usize] as f64));
            targets.push(movie.frame(q + 1)[cell] as f64);
        }
        RowProblem {
            arity: nbrs.len(),
            inputs,
            targets,
        }
    }

    /// Direct construction; `inputs` is row-major `Q x M`.
    pub fn from_parts(arity: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != arity * targets.len() {
            return Err(AstmError::DimensionMismatch {
                what: "row inputs",
                expected: arity * targets.len(),
                got: inputs.len(),
            });
        }
        Ok(RowProblem {
            arity,
            inputs,
            targets,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn transitions(&self) -> usize {
        self.targets.len()
    }

    pub fn input(&self, q: usize) -> &[f64] {
        &self.inputs[q * self.arity..(q + 1) * self.arity]
    }

    pub fn target(&self, q: usize) -> f64 {
        self.targets[q]
    }

    /// Pre-activation `sum_j w_j s_j^(q)`.
    pub fn drive(&self, w: &[f64], q: usize) -> f64 {
        dot(w, self.input(q))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowOutcome {
    pub weights: Vec<f64>,
    pub converged: bool,
    pub epochs: usize,
    pub violations: usize,
}

fn check_dims(movie: &Movie, conn: &ConnectivityMap) -> Result<()> {
    if movie.pixel_count() != conn.cell_count() {
        return Err(AstmError::DimensionMismatch {
            what: "movie pixels for connectivity cells",
            expected: conn.cell_count(),
            got: movie.pixel_count(),
        });
    }
    Ok(())
}

/// Records `movie` into weights with the given method.
pub fn record(
    movie: &Movie,
    conn: &ConnectivityMap,
    method: &Method,
    exec: Exec,
) -> Result<(WeightMatrix, RecordingReport)> {
    check_dims(movie, conn)?;
    method.validate()?;
    let rows = exec.map(0..conn.cell_count(), |cell| {
        let problem = RowProblem::build(movie, conn, cell);
        let zeros = vec![0.0; problem.arity()];
        match *method {
            Method::Hebb => train_row_hebb(&problem),
            Method::Qp(p) => train_row_qp(&problem, &p),
            Method::AnalogGd(p) => train_row_analog(&problem, &zeros, &p),
            Method::DiscreteGd(p) => train_row_discrete(&problem, &zeros, &p),
        }
    });
    let mut report = RecordingReport {
        converged: true,
        epochs_used: 0,
        violations: 0,
        weight_rms: 0.0,
    };
    let mut weights = Vec::with_capacity(conn.cell_count() * conn.arity());
    for row in rows {
        report.converged &= row.converged;
        report.epochs_used = report.epochs_used.max(row.epochs);
        report.violations += row.violations;
        weights.extend_from_slice(&row.weights);
    }
    let weights = WeightMatrix::new(conn.cell_count(), conn.arity(), weights)?;
    report.weight_rms = weights.rms();
    Ok((weights, report))
}

pub fn record_hebb(
    movie: &Movie,
    conn: &ConnectivityMap,
) -> Result<(WeightMatrix, RecordingReport)> {
    record(movie, conn, &Method::Hebb, Exec::default())
}

pub fn record_minnorm_qp(
    movie: &Movie,
    conn: &ConnectivityMap,
    margin: f64,
    max_iters: usize,
    tol: f64,
) -> Result<(WeightMatrix, RecordingReport)> {
    let p = QpParams {
        margin,
        max_iters,
        tol,
        ..Default::default()
    };
    record(movie, conn, &Method::Qp(p), Exec::default())
}

pub fn record_analog_gd(
    movie: &Movie,
    conn: &ConnectivityMap,
    eta: f64,
    max_epochs: usize,
    eps_stop: f64,
) -> Result<(WeightMatrix, RecordingReport)> {
    let p = AnalogParams {
        eta,
        max_epochs,
        eps_stop,
    };
    record(movie, conn, &Method::AnalogGd(p), Exec::default())
}

pub fn record_discrete_gd(
    movie: &Movie,
    conn: &ConnectivityMap,
    eta: f64,
    margin: f64,
    max_epochs: usize,
) -> Result<(WeightMatrix, RecordingReport)> {
    let p = DiscreteParams {
        eta,
        margin,
        max_epochs,
    };
    record(movie, conn, &Method::DiscreteGd(p), Exec::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::random_movie;

    fn small() -> (LatticeConfig, ConnectivityMap) {
        let cfg = LatticeConfig::new(7, 3).unwrap();
        (cfg, ConnectivityMap::build(&cfg))
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (_, conn) = small();
        let movie = random_movie(10, 3, 0.5, 1).unwrap();
        assert!(matches!(
            record_hebb(&movie, &conn),
            Err(AstmError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let (_, conn) = small();
        let movie = random_movie(49, 3, 0.5, 1).unwrap();
        assert!(record_minnorm_qp(&movie, &conn, 0.0, 10, 1e-8).is_err());
        assert!(record_analog_gd(&movie, &conn, 0.0, 10, 0.1).is_err());
        assert!(record_discrete_gd(&movie, &conn, 0.01, -1.0, 10).is_err());
    }

    #[test]
    fn weight_text_round_trip() {
        let (cfg, conn) = small();
        let movie = random_movie(49, 5, 0.5, 3).unwrap();
        let (w, _) = record_minnorm_qp(&movie, &conn, 1.0, 2000, 1e-8).unwrap();
        let text = w.to_text(&cfg).unwrap();
        assert!(text.starts_with("W1 7 3\n"));
        let (cfg2, w2) = WeightMatrix::parse_text(&text).unwrap();
        assert_eq!(cfg2, cfg);
        assert_eq!(w2, w);
        assert!(WeightMatrix::parse_text("W1 3 3\n1 2 3\n").is_err());
    }

    #[test]
    fn rows_are_trained_independently() {
        // Re-running every recorder on a relabelled subset of rows must
        // reproduce the same per-row weights.
        let (_, conn) = small();
        let movie = random_movie(49, 6, 0.5, 8).unwrap();
        let methods = [
            Method::Hebb,
            Method::Qp(QpParams::default()),
            Method::AnalogGd(AnalogParams {
                max_epochs: 500,
                ..Default::default()
            }),
            Method::DiscreteGd(DiscreteParams::default()),
        ];
        for method in methods {
            let (full, _) = record(&movie, &conn, &method, Exec::Sequential).unwrap();
            for cell in [0, 13, 48] {
                let problem = RowProblem::build(&movie, &conn, cell);
                let zeros = vec![0.0; problem.arity()];
                let row = match method {
                    Method::Hebb => train_row_hebb(&problem),
                    Method::Qp(p) => train_row_qp(&problem, &p),
                    Method::AnalogGd(p) => train_row_analog(&problem, &zeros, &p),
                    Method::DiscreteGd(p) => train_row_discrete(&problem, &zeros, &p),
                };
                assert_eq!(row.weights, full.row(cell), "{}", method.name());
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_weights() {
        let (_, conn) = small();
        let movie = random_movie(49, 8, 0.5, 4).unwrap();
        let m = Method::DiscreteGd(DiscreteParams::default());
        let a = record(&movie, &conn, &m, Exec::Sequential).unwrap();
        let b = record(&movie, &conn, &m, Exec::Threads(3)).unwrap();
        assert_eq!(a, b);
    }
}
