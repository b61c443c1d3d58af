use super::{AnalogParams, RowOutcome, RowProblem};
use crate::linalg::axpy;

/// Delta rule: for `q = 1..Q` in order, `eps = w.s^(q) - s^(q+1)` and
/// `w -= eta * eps * s^(q)`. Stops after the first epoch in which every
/// `|eps| < eps_stop`, or after `max_epochs`.
///
/// `violations` counts the transitions of the last epoch whose error was at
/// least `eps_stop`.
pub fn train_row(problem: &RowProblem, init: &[f64], params: &AnalogParams) -> RowOutcome {
    let mut w = init.to_vec();
    let mut epochs = 0;
    let mut violations = problem.transitions();
    while epochs < params.max_epochs {
        epochs += 1;
        violations = 0;
        for q in 0..problem.transitions() {
            let eps = problem.drive(&w, q) - problem.target(q);
            if eps.abs() >= params.eps_stop {
                violations += 1;
            }
            if eps != 0.0 {
                axpy(-params.eta * eps, problem.input(q), &mut w);
            }
        }
        if violations == 0 {
            break;
        }
    }
    RowOutcome {
        weights: w,
        converged: violations == 0,
        epochs,
        violations,
    }
}
