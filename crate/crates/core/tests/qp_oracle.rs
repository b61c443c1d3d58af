//! Minimum-norm recording against an optimality certificate and an
//! enumeration oracle.

use astm::recording::{train_row_active_set, train_row_hildreth, QpParams, QpSolver, RowProblem};
use proptest::prelude::*;

fn row(arity: usize, signs: &[bool]) -> RowProblem {
    let q = signs.len() / (arity + 1);
    let pm = |b: bool| if b { 1.0 } else { -1.0 };
    let inputs = signs[..arity * q].iter().map(|&b| pm(b)).collect();
    let targets = signs[arity * q..arity * q + q]
        .iter()
        .map(|&b| pm(b))
        .collect();
    RowProblem::from_parts(arity, inputs, targets).unwrap()
}

fn constraint(p: &RowProblem, q: usize) -> Vec<f64> {
    p.input(q).iter().map(|x| x * p.target(q)).collect()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// KKT certificate: feasible, and `w` is a nonnegative combination of the
/// tight constraints (nonnegative least squares by coordinate descent).
fn is_optimal(p: &RowProblem, w: &[f64], margin: f64) -> bool {
    let mut tight = Vec::new();
    for q in 0..p.transitions() {
        let n = constraint(p, q);
        let s = dotp(&n, w);
        if s < margin - 1e-7 {
            return false;
        }
        if s <= margin + 1e-7 {
            tight.push(n);
        }
    }
    let mut mu = vec![0.0; tight.len()];
    let mut resid = w.to_vec();
    for _ in 0..50_000 {
        let mut moved = 0.0f64;
        for (m, n) in mu.iter_mut().zip(&tight) {
            let step = (dotp(n, &resid) / dotp(n, n)).max(-*m);
            *m += step;
            for (r, x) in resid.iter_mut().zip(n) {
                *r -= step * x;
            }
            moved = moved.max(step.abs());
        }
        if moved < 1e-13 {
            break;
        }
    }
    dotp(&resid, &resid).sqrt() < 1e-6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn active_set_solutions_are_certified(
        arity in 3usize..20,
        q in 1usize..30,
        signs in proptest::collection::vec(any::<bool>(), 21 * 30),
    ) {
        let p = row(arity, &signs[..(arity + 1) * q]);
        let out = train_row_active_set(&p, &QpParams::default());
        if out.converged {
            prop_assert!(is_optimal(&p, &out.weights, 1.0));
            for k in 0..q {
                prop_assert_eq!(astm::linalg::sgn(p.drive(&out.weights, k)), p.target(k));
            }
        } else {
            prop_assert!(out.violations > 0);
        }
    }

    #[test]
    fn solvers_agree_when_both_converge(
        arity in 3usize..12,
        q in 1usize..12,
        signs in proptest::collection::vec(any::<bool>(), 13 * 12),
    ) {
        let p = row(arity, &signs[..(arity + 1) * q]);
        let a = train_row_active_set(&p, &QpParams::default());
        let h = train_row_hildreth(&p, &QpParams { solver: QpSolver::Hildreth, max_iters: 20_000, ..Default::default() });
        prop_assert_eq!(a.converged, h.converged);
        if a.converged {
            let d: f64 = a.weights.iter().zip(&h.weights).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d < 1e-6, "distance {}", d);
        }
    }
}

#[test]
fn orthogonal_constraints_scale_independently() {
    // n_1 = (1, 1, 0, 0), n_2 = (0, 0, 1, -1), margins 1 -> w = (.5, .5, .5, -.5)
    let p = RowProblem::from_parts(
        4,
        vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0],
        vec![1.0, -1.0],
    )
    .unwrap();
    for solver in [QpSolver::ActiveSet, QpSolver::Hildreth] {
        let out = astm::recording::train_row_qp(
            &p,
            &QpParams {
                solver,
                ..Default::default()
            },
        );
        let want = [0.5, 0.5, 0.5, -0.5];
        for (w, e) in out.weights.iter().zip(want) {
            assert!((w - e).abs() < 1e-9, "{solver:?}: {:?}", out.weights);
        }
    }
}
