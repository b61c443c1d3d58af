use super::{RowOutcome, RowProblem};

/// Outer-product rule `w_j = (1/Q) sum_q s^(q+1) s_j^(q)`.
pub fn train_row(problem: &RowProblem) -> RowOutcome {
    let q_count = problem.transitions();
    let mut sums = vec![0.0; problem.arity()];
    for q in 0..q_count {
        let y = problem.target(q);
        for (acc, x) in sums.iter_mut().zip(problem.input(q)) {
            *acc += y * x;
        }
    }
    let scale = q_count as f64;
    RowOutcome {
        weights: sums.into_iter().map(|s| s / scale).collect(),
        converged: true,
        epochs: 1,
        violations: 0,
    }
}
