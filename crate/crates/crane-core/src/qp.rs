//! Dense convex QP solver: minimize 1/2 x'Hx + g'x subject to Wx <= w,
//! H symmetric positive definite.
//!
//! Dual active-set method: start at the unconstrained minimizer, repeatedly
//! add the most violated constraint, stepping in primal and dual space and
//! dropping blocking constraints as needed. At the sizes the controller
//! produces (a handful of variables, low hundreds of constraints) dense
//! re-solves per iteration are cheaper than maintaining factorizations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{CraneError, Result};

/// Solution of a QP together with optimality diagnostics.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Active constraint rows and their Lagrange multipliers.
    pub active: Vec<(usize, f64)>,
    pub iterations: usize,
    pub objective: f64,
    /// Worst KKT residual: stationarity, primal feasibility and
    /// complementary slackness.
    pub kkt_residual: f64,
}

struct Workspace<'a> {
    h_chol: &'a Cholesky<f64, Dyn>,
    w: &'a DMatrix<f64>,
}

impl Workspace<'_> {
    /// Constraint normal in >= form (n_i = -W_i').
    fn normal(&self, i: usize) -> DVector<f64> {
        -self.w.row(i).transpose()
    }

    /// Step directions for adding constraint p against active set `active`:
    /// r solves (N'H^-1 N) r = N'H^-1 n_p, z = H^-1 (n_p - N r).
    fn directions(&self, active: &[(usize, f64)], p: usize) -> (DVector<f64>, DVector<f64>) {
        let n_p = self.normal(p);
        let hinv_np = self.h_chol.solve(&n_p);
        if active.is_empty() {
            return (hinv_np, DVector::zeros(0));
        }
        let m = active.len();
        let n = n_p.len();
        let mut n_a = DMatrix::zeros(n, m);
        for (j, (idx, _)) in active.iter().enumerate() {
            n_a.set_column(j, &self.normal(*idx));
        }
        let hinv_na = self.h_chol.solve(&n_a);
        let gram = n_a.transpose() * &hinv_na;
        let rhs = n_a.transpose() * &hinv_np;
        // SVD solve tolerates a linearly dependent incoming constraint
        let r = gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(m));
        let z = &hinv_np - hinv_na * &r;
        (z, r)
    }
}

/// Solve the QP. `tol` is the feasibility/KKT tolerance; `max_iter` caps the
/// total number of active-set changes.
pub fn solve_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    w: &DMatrix<f64>,
    w_rhs: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution> {
    let n = g.len();
    let m = w.nrows();
    assert_eq!(h.nrows(), n);
    assert_eq!(h.ncols(), n);
    assert!(m == 0 || w.ncols() == n);
    assert_eq!(w_rhs.len(), m);

    let h_chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| CraneError::InvalidParameter("QP Hessian not positive definite".into()))?;

    let mut x = -h_chol.solve(g);
    let mut active: Vec<(usize, f64)> = Vec::new();
    let ws = Workspace { h_chol: &h_chol, w };

    let mut iterations = 0;
    loop {
        // most violated constraint (>= form slack: n_i'x - b_i = w_i - W_i x)
        let slack = w_rhs - w * &x;
        let mut p = None;
        let mut worst = -tol;
        for i in 0..m {
            if slack[i] < worst && !active.iter().any(|(j, _)| *j == i) {
                worst = slack[i];
                p = Some(i);
            }
        }
        let Some(p) = p else {
            let obj = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
            let kkt = kkt_residual(h, g, w, w_rhs, &x, &active);
            return Ok(QpSolution {
                x,
                active,
                iterations,
                objective: obj,
                kkt_residual: kkt,
            });
        };

        // bring p into the active set, dropping blockers as needed
        let mut s_p = slack[p];
        let mut lambda_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(CraneError::MaxIterations);
            }
            let (z, r) = ws.directions(&active, p);
            let n_p = ws.normal(p);
            let ztn = z.dot(&n_p);

            // dual step bound from active multipliers
            let mut t1 = f64::INFINITY;
            let mut blocker = None;
            for (j, (_, lam)) in active.iter().enumerate() {
                if r[j] > tol {
                    let t = lam / r[j];
                    if t < t1 {
                        t1 = t;
                        blocker = Some(j);
                    }
                }
            }
            // primal step to make p tight
            let t2 = if ztn > tol { -s_p / ztn } else { f64::INFINITY };

            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(CraneError::Infeasible);
            }
            x += t * &z;
            for (j, (_, lam)) in active.iter_mut().enumerate() {
                *lam -= t * r[j];
            }
            lambda_p += t;
            s_p += t * ztn;

            if t2 <= t1 {
                active.push((p, lambda_p));
                break;
            }
            active.remove(blocker.expect("finite t1 implies a blocker"));
        }
    }
}

/// Worst KKT residual of a candidate solution.
pub fn kkt_residual(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    w: &DMatrix<f64>,
    w_rhs: &DVector<f64>,
    x: &DVector<f64>,
    active: &[(usize, f64)],
) -> f64 {
    // stationarity: Hx + g + W_A' lambda = 0 (lambda >= 0 for <= rows)
    let mut grad = h * x + g;
    for (i, lam) in active {
        grad += w.row(*i).transpose() * *lam;
    }
    let mut worst = grad.amax();
    // primal feasibility
    let slack = w_rhs - w * x;
    for i in 0..slack.len() {
        worst = worst.max(-slack[i]);
    }
    // dual feasibility and complementary slackness
    for (i, lam) in active {
        worst = worst.max(-lam);
        worst = worst.max((lam * slack[*i]).abs());
    }
    worst
}
