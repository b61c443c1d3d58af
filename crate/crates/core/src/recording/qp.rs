use super::{QpParams, QpSolver, RowOutcome, RowProblem};
use crate::linalg::{axpy, cholesky_solve, dot};

/// Minimum-norm row subject to `s^(q+1) * sum_j w_j s_j^(q) >= margin` for
/// every transition, by the solver chosen in `params`.
pub fn train_row(problem: &RowProblem, params: &QpParams) -> RowOutcome {
    match params.solver {
        QpSolver::Hildreth => train_row_hildreth(problem, params),
        QpSolver::ActiveSet => train_row_active_set(problem, params),
    }
}

/// Target-signed inputs `x_q = s_i^(q+1) s^(q)`, row-major `Q x M`.
fn signed_inputs(problem: &RowProblem) -> Vec<f64> {
    (0..problem.transitions())
        .flat_map(|q| {
            let y = problem.target(q);
            problem.input(q).iter().map(move |x| y * x)
        })
        .collect()
}

/// Hildreth's method: cyclic coordinate ascent on the dual multipliers,
/// `lambda_q <- max(0, lambda_q + (margin - x_q.w) / |x_q|^2)` with
/// `w = sum_q lambda_q x_q` and `x_q` the target-signed input.
///
/// Whenever the support `{q : lambda_q > 0}` changes, the equality problem
/// on that support is solved directly; if its multipliers are non-negative
/// and every constraint holds within `tol`, the KKT conditions are met and
/// that solution is returned. Otherwise the passes continue, stopping once
/// every projected dual step is within `tol` and no constraint is violated
/// by more than `tol`. Infeasible rows return the iterate after `max_iters`
/// passes.
pub fn train_row_hildreth(problem: &RowProblem, params: &QpParams) -> RowOutcome {
    let m = problem.arity();
    let q_count = problem.transitions();
    let signed = signed_inputs(problem);
    let row = |q: usize| &signed[q * m..(q + 1) * m];
    let norms: Vec<f64> = (0..q_count).map(|q| dot(row(q), row(q))).collect();

    let mut lambda = vec![0.0; q_count];
    let mut w = vec![0.0; m];
    let mut passes = 0;
    let mut converged = false;
    let mut tried: Vec<usize> = Vec::new();
    while passes < params.max_iters {
        passes += 1;
        let mut worst = 0.0f64;
        for q in 0..q_count {
            if norms[q] == 0.0 {
                continue;
            }
            let gap = params.margin - dot(&w, row(q));
            let delta = (gap / norms[q]).max(-lambda[q]);
            worst = worst.max((delta * norms[q]).abs());
            if delta != 0.0 {
                lambda[q] += delta;
                axpy(delta, row(q), &mut w);
            }
        }
        if worst <= params.tol && count_violations(&w, &signed, m, params) == 0 {
            converged = true;
            break;
        }
        let support: Vec<usize> = (0..q_count).filter(|&q| lambda[q] > 0.0).collect();
        if support.len() <= m && support != tried {
            if let Some(exact) = solve_on_support(&signed, m, &support, params) {
                w = exact;
                converged = true;
                break;
            }
            tried = support;
        }
    }
    let violations = count_violations(&w, &signed, m, params);
    RowOutcome {
        weights: w,
        converged: converged && violations == 0,
        epochs: passes,
        violations,
    }
}

/// `w = X_S^T mu` with `X_S X_S^T mu = margin`; `None` unless `mu >= 0` and
/// `w` satisfies every constraint.
fn solve_on_support(
    signed: &[f64],
    m: usize,
    support: &[usize],
    params: &QpParams,
) -> Option<Vec<f64>> {
    let k = support.len();
    let row = |q: usize| &signed[q * m..(q + 1) * m];
    let mut gram = vec![0.0; k * k];
    for (a, &qa) in support.iter().enumerate() {
        for (b, &qb) in support.iter().enumerate().take(a + 1) {
            let g = dot(row(qa), row(qb));
            gram[a * k + b] = g;
            gram[b * k + a] = g;
        }
    }
    let mu = cholesky_solve(&gram, &vec![params.margin; k])?;
    if mu.iter().any(|&x| x < 0.0) {
        return None;
    }
    let mut w = vec![0.0; m];
    for (&q, &x) in support.iter().zip(&mu) {
        axpy(x, row(q), &mut w);
    }
    (count_violations(&w, signed, m, params) == 0).then_some(w)
}

/// Dual active-set method (Goldfarb-Idnani) for the identity Hessian.
///
/// Starts from `w = 0` and repeatedly adds the most violated constraint,
/// taking full steps along its projection onto the null space of the active
/// normals and dropping active constraints whose multipliers would turn
/// negative. Terminates in finitely many steps with the exact minimum-norm
/// row, or reports the row infeasible when a violated constraint cannot be
/// satisfied by any step. `max_iters` caps add/drop steps.
///
/// The factorization `J^T N_A = [R; 0]` of the active normals is kept with
/// `J` orthogonal and updated by Givens rotations.
pub fn train_row_active_set(problem: &RowProblem, params: &QpParams) -> RowOutcome {
    let m = problem.arity();
    let q_count = problem.transitions();
    let signed = signed_inputs(problem);
    let row = |q: usize| &signed[q * m..(q + 1) * m];

    // column-major m x m
    let mut j = vec![0.0; m * m];
    for c in 0..m {
        j[c * m + c] = 1.0;
    }
    let mut r = vec![0.0; m * m];
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut w = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut iters = 0;
    let mut stuck = false;

    'outer: loop {
        let mut p = None;
        let mut most = -params.tol;
        for q in 0..q_count {
            let slack = dot(&w, row(q)) - params.margin;
            if slack < most {
                most = slack;
                p = Some(q);
            }
        }
        let Some(p) = p else { break };
        let np = row(p);
        let np_norm = dot(np, np).sqrt();
        let mut up = 0.0;
        loop {
            if iters >= params.max_iters {
                stuck = true;
                break 'outer;
            }
            iters += 1;
            let k = active.len();
            for (c, dc) in d.iter_mut().enumerate() {
                *dc = dot(&j[c * m..(c + 1) * m], np);
            }
            z.fill(0.0);
            for c in k..m {
                axpy(d[c], &j[c * m..(c + 1) * m], &mut z);
            }
            let tail = dot(&d[k..], &d[k..]);
            let rv = upper_solve(&r, m, k, &d[..k]);

            let mut t1 = f64::INFINITY;
            let mut drop = 0;
            for (c, &rc) in rv.iter().enumerate() {
                if rc > 1e-14 && u[c] / rc < t1 {
                    t1 = u[c] / rc;
                    drop = c;
                }
            }
            let t2 = if tail.sqrt() <= 1e-10 * np_norm {
                f64::INFINITY
            } else {
                (params.margin - dot(&w, np)) / tail
            };
            let t = t1.min(t2);
            if t == f64::INFINITY {
                stuck = true;
                break 'outer;
            }
            for (uc, rc) in u.iter_mut().zip(&rv) {
                *uc -= t * rc;
            }
            up += t;
            if t2.is_finite() {
                axpy(t, &z, &mut w);
            }
            if t2 <= t1 {
                add_column(&mut j, &mut r, m, k, &mut d);
                active.push(p);
                u.push(up);
                continue 'outer;
            }
            drop_column(&mut j, &mut r, m, k, drop);
            active.remove(drop);
            u.remove(drop);
        }
    }
    let violations = count_violations(&w, &signed, m, params);
    RowOutcome {
        weights: w,
        converged: !stuck && violations == 0,
        epochs: iters,
        violations,
    }
}

/// `x = R^-1 b` for the leading `k x k` block of column-major `r`.
fn upper_solve(r: &[f64], m: usize, k: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..k).rev() {
        let mut s = x[i];
        for c in i + 1..k {
            s -= r[c * m + i] * x[c];
        }
        x[i] = s / r[i * m + i];
    }
    x
}

/// Rotates `J` in columns `(a, a + 1)`: `J_a <- c J_a + s J_b`,
/// `J_b <- -s J_a + c J_b`.
fn rotate_columns(j: &mut [f64], m: usize, a: usize, c: f64, s: f64) {
    let (left, right) = j.split_at_mut((a + 1) * m);
    let ja = &mut left[a * m..];
    let jb = &mut right[..m];
    for (x, y) in ja.iter_mut().zip(jb.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa + s * yb;
        *y = -s * xa + c * yb;
    }
}

/// Appends the normal with `d = J^T n` as active column `k`.
fn add_column(j: &mut [f64], r: &mut [f64], m: usize, k: usize, d: &mut [f64]) {
    for i in (k + 1..m).rev() {
        let (a, b) = (d[i - 1], d[i]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        d[i - 1] = h;
        d[i] = 0.0;
        rotate_columns(j, m, i - 1, c, s);
    }
    r[k * m..k * m + k + 1].copy_from_slice(&d[..=k]);
}

/// Removes active column `l` of `k` and restores the triangular form.
fn drop_column(j: &mut [f64], r: &mut [f64], m: usize, k: usize, l: usize) {
    r.copy_within((l + 1) * m..k * m, l * m);
    r[(k - 1) * m..k * m].fill(0.0);
    for i in l..k - 1 {
        let (a, b) = (r[i * m + i], r[i * m + i + 1]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        for col in i..k - 1 {
            let (x, y) = (r[col * m + i], r[col * m + i + 1]);
            r[col * m + i] = c * x + s * y;
            r[col * m + i + 1] = -s * x + c * y;
        }
        r[i * m + i + 1] = 0.0;
        rotate_columns(j, m, i, c, s);
    }
}

fn count_violations(w: &[f64], signed: &[f64], m: usize, params: &QpParams) -> usize {
    signed
        .chunks_exact(m)
        .filter(|x| dot(w, x) < params.margin - params.tol)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{random_movie, ConnectivityMap, LatticeConfig};

    const SOLVERS: [QpSolver; 2] = [QpSolver::ActiveSet, QpSolver::Hildreth];

    fn with(solver: QpSolver) -> QpParams {
        QpParams {
            solver,
            ..Default::default()
        }
    }

    #[test]
    fn single_constraint_projection() {
        // a = (1, 1), y = +1, margin 1: w = y a / |a|^2 = (0.5, 0.5)
        let p = RowProblem::from_parts(2, vec![1.0, 1.0], vec![1.0]).unwrap();
        for solver in SOLVERS {
            let out = train_row(&p, &with(solver));
            assert!(out.converged);
            assert_eq!(out.violations, 0);
            assert!((out.weights[0] - 0.5).abs() < 1e-12);
            assert!((out.weights[1] - 0.5).abs() < 1e-12);
            let norm2: f64 = out.weights.iter().map(|w| w * w).sum();
            assert!((norm2 - 0.5).abs() < 1e-12);
            assert!((p.drive(&out.weights, 0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contradictory_transitions_are_infeasible() {
        // same input, opposite targets: h >= 1 and -h >= 1
        let p = RowProblem::from_parts(3, vec![1.0, -1.0, 1.0, 1.0, -1.0, 1.0], vec![1.0, -1.0])
            .unwrap();
        for solver in SOLVERS {
            let params = QpParams {
                max_iters: 50,
                ..with(solver)
            };
            let out = train_row(&p, &params);
            assert!(!out.converged);
            assert!(out.violations >= 1);
            assert!(out.weights.iter().all(|w| w.is_finite()));
        }
        let out = train_row_hildreth(
            &p,
            &QpParams {
                max_iters: 50,
                ..with(QpSolver::Hildreth)
            },
        );
        assert_eq!(out.epochs, 50);
        // the active-set method detects it without exhausting the cap
        let out = train_row_active_set(&p, &QpParams::default());
        assert!(out.epochs < 10);
    }

    #[test]
    fn inactive_constraints_get_no_weight() {
        // Second constraint is implied by the first with slack, so the
        // optimum is the projection onto the first alone.
        let p = RowProblem::from_parts(2, vec![1.0, 1.0, 2.0, 2.0], vec![1.0, 1.0]).unwrap();
        for solver in SOLVERS {
            let out = train_row(&p, &with(solver));
            assert!(out.converged);
            assert!((out.weights[0] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn solvers_agree_on_feasible_rows() {
        let cfg = LatticeConfig::new(9, 5).unwrap();
        let conn = ConnectivityMap::build(&cfg);
        for (q, seed) in [(6, 1), (18, 2), (30, 3)] {
            let movie = random_movie(81, q, 0.5, seed).unwrap();
            for cell in [0, 40, 80] {
                let p = RowProblem::build(&movie, &conn, cell);
                let a = train_row_active_set(&p, &QpParams::default());
                let h = train_row_hildreth(
                    &p,
                    &QpParams {
                        max_iters: 20_000,
                        ..with(QpSolver::Hildreth)
                    },
                );
                assert!(a.converged && h.converged, "q={q} cell={cell}");
                let gap: f64 = a
                    .weights
                    .iter()
                    .zip(&h.weights)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                assert!(gap.sqrt() < 1e-6, "q={q} cell={cell} gap={}", gap.sqrt());
            }
        }
    }
}
