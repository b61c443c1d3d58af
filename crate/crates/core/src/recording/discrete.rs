use super::{DiscreteParams, RowOutcome, RowProblem};
use crate::linalg::{axpy, sgn};

/// Sign-error rule with margin `D`: `S = sgn(w.s^(q) - D s^(q+1))`,
/// `eps = S - s^(q+1)`, `w -= eta * eps * s^(q)`. Converges when a whole
/// epoch passes with every `eps = 0`, which forces
/// `s^(q+1) * w.s^(q) >= D` on every transition.
pub fn train_row(problem: &RowProblem, init: &[f64], params: &DiscreteParams) -> RowOutcome {
    train_row_with_sign(problem, init, params, sgn)
}

pub(crate) fn train_row_with_sign(
    problem: &RowProblem,
    init: &[f64],
    params: &DiscreteParams,
    sign: impl Fn(f64) -> f64,
) -> RowOutcome {
    let mut w = init.to_vec();
    let mut epochs = 0;
    let mut converged = false;
    while epochs < params.max_epochs {
        epochs += 1;
        let mut updates = 0usize;
        for q in 0..problem.transitions() {
            let s = problem.target(q);
            let predicted = sign(problem.drive(&w, q) - params.margin * s);
            let eps = predicted - s;
            if eps != 0.0 {
                axpy(-params.eta * eps, problem.input(q), &mut w);
                updates += 1;
            }
        }
        if updates == 0 {
            converged = true;
            break;
        }
    }
    let violations = (0..problem.transitions())
        .filter(|&q| {
            sign(problem.drive(&w, q) - params.margin * problem.target(q)) != problem.target(q)
        })
        .count();
    RowOutcome {
        weights: w,
        converged,
        epochs,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{random_movie, ConnectivityMap, LatticeConfig};

    #[test]
    fn converged_rows_hold_the_margin() {
        let cfg = LatticeConfig::new(9, 5).unwrap();
        let conn = ConnectivityMap::build(&cfg);
        let movie = random_movie(81, 12, 0.5, 5).unwrap();
        let params = DiscreteParams::default();
        for cell in 0..81 {
            let p = RowProblem::build(&movie, &conn, cell);
            let out = train_row(&p, &vec![0.0; p.arity()], &params);
            assert!(out.converged);
            assert_eq!(out.violations, 0);
            for q in 0..p.transitions() {
                assert!(p.target(q) * p.drive(&out.weights, q) >= params.margin);
            }
        }
    }

    #[test]
    fn margin_satisfying_start_makes_no_updates() {
        let p = RowProblem::from_parts(2, vec![1.0, 1.0, 1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let init = [3.0, 0.0];
        let out = train_row(&p, &init, &DiscreteParams::default());
        assert!(out.converged);
        assert_eq!(out.epochs, 1);
        assert_eq!(out.weights, init);
    }

    #[test]
    fn infeasible_row_stops_at_cap() {
        let p = RowProblem::from_parts(1, vec![1.0, 1.0], vec![1.0, -1.0]).unwrap();
        let params = DiscreteParams {
            max_epochs: 25,
            ..Default::default()
        };
        let out = train_row(&p, &[0.0], &params);
        assert!(!out.converged);
        assert_eq!(out.epochs, 25);
        assert!(out.violations >= 1);
    }
}
