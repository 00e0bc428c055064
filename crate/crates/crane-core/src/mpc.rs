//! Constrained receding-horizon tracking controller and the companion state
//! observer.
//!
//! Predictions over H_p steps are affine in the stacked control-input
//! changes over H_u steps: Y = Psi x + Gamma u_prev + Theta dU + Xi F_d,
//! with the input held beyond the control horizon. Motor-voltage bounds
//! become cumulative-sum constraints on dU; workspace bounds map through
//! Theta. The resulting QP is solved each step and only the first move is
//! applied; on infeasibility the controller falls back to the shifted
//! remainder of the last successful move sequence.

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::model::DiscretePlantModel;
use crate::qp::solve_qp;

pub type StateVec = SMatrix<f64, 6, 1>;
pub type InputVec = SMatrix<f64, 3, 1>;
pub type OutputVec = SMatrix<f64, 3, 1>;

/// Horizons, weights and bounds of the receding-horizon controller.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MpcConfig {
    pub h_p: usize,
    pub h_u: usize,
    /// Diagonal tracking weights per output (x, y, l).
    pub q: [f64; 3],
    /// Diagonal move weights per input.
    pub r: [f64; 3],
    pub u_min: [f64; 3],
    pub u_max: [f64; 3],
    pub y_min: [f64; 3],
    pub y_max: [f64; 3],
    /// Keep hard workspace rows in the QP; disabling them is the standard
    /// anti-infeasibility measure.
    pub output_constraints: bool,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl MpcConfig {
    /// Desk-rig tuning: H_p = 20, H_u = 3, Q = 5000 I, R = 1e-3 I,
    /// +/- 24 V, workspace [0, 0.6] m with a 1 mm hoisting floor.
    pub fn desk_rig() -> Self {
        MpcConfig {
            h_p: 20,
            h_u: 3,
            q: [50e2; 3],
            r: [1e-3; 3],
            u_min: [-24.0; 3],
            u_max: [24.0; 3],
            y_min: [0.0, 0.0, 1e-3],
            y_max: [6e-1; 3],
            output_constraints: true,
            qp_tol: 1e-9,
            qp_max_iter: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_u == 0 || self.h_p < self.h_u {
            return Err(CraneError::InvalidParameter(format!(
                "horizons H_p = {}, H_u = {}",
                self.h_p, self.h_u
            )));
        }
        if self.q.iter().any(|q| *q < 0.0) || self.r.iter().any(|r| *r < 0.0) {
            return Err(CraneError::InvalidParameter("negative weight".into()));
        }
        if self.q.iter().all(|q| *q == 0.0) {
            return Err(CraneError::InvalidParameter("Q all zero".into()));
        }
        for i in 0..3 {
            if self.u_min[i] >= self.u_max[i] || self.y_min[i] >= self.y_max[i] {
                return Err(CraneError::InvalidParameter("empty bound interval".into()));
            }
        }
        Ok(())
    }
}

/// Stacked prediction matrices.
#[derive(Debug, Clone)]
pub struct PredictionMatrices {
    /// 3H_p x 6 free response of the state.
    pub psi: DMatrix<f64>,
    /// 3H_p x 3 effect of the previously applied input.
    pub gamma: DMatrix<f64>,
    /// 3H_p x 3H_u effect of the input changes (block lower triangular).
    pub theta: DMatrix<f64>,
    /// 3H_p x 3H_p effect of the lifted disturbance sequence.
    pub xi: DMatrix<f64>,
    pub h_p: usize,
    pub h_u: usize,
}

/// Build the prediction matrices for the given horizons.
pub fn build_prediction(model: &DiscretePlantModel, h_p: usize, h_u: usize) -> PredictionMatrices {
    assert!(h_u >= 1 && h_p >= h_u);
    let a = model.a_dyn();
    let b = model.b_dyn();
    let w_d = model.w_d_dyn();
    let c = model.c_dyn();

    // powers of A and cumulative sums S_i = sum_{q=0}^{i} A^q B
    let mut a_pow = vec![DMatrix::identity(6, 6)];
    for i in 1..=h_p {
        let next = &a_pow[i - 1] * &a;
        a_pow.push(next);
    }
    let mut s = vec![b.clone()]; // S_0 = B
    for i in 1..h_p {
        let next = &a_pow[i] * &b + &s[i - 1];
        s.push(next);
    }

    let mut psi = DMatrix::zeros(3 * h_p, 6);
    let mut gamma = DMatrix::zeros(3 * h_p, 3);
    let mut theta = DMatrix::zeros(3 * h_p, 3 * h_u);
    let mut xi = DMatrix::zeros(3 * h_p, 3 * h_p);
    for i in 1..=h_p {
        let row = 3 * (i - 1);
        psi.view_mut((row, 0), (3, 6)).copy_from(&(&c * &a_pow[i]));
        gamma.view_mut((row, 0), (3, 3)).copy_from(&(&c * &s[i - 1]));
        for j in 0..h_u.min(i) {
            let block = &c * &s[i - 1 - j];
            theta.view_mut((row, 3 * j), (3, 3)).copy_from(&block);
        }
        for p in 0..i {
            let block = &c * &a_pow[i - 1 - p] * &w_d;
            xi.view_mut((row, 3 * p), (3, 3)).copy_from(&block);
        }
    }
    PredictionMatrices {
        psi,
        gamma,
        theta,
        xi,
        h_p,
        h_u,
    }
}

/// Hold the current disturbance estimate constant over the horizon.
pub fn lift_disturbance(f_d: &InputVec, h_p: usize) -> DVector<f64> {
    let mut out = DVector::zeros(3 * h_p);
    for i in 0..h_p {
        out.view_mut((3 * i, 0), (3, 1)).copy_from(f_d);
    }
    out
}

/// Assemble the inequality constraints W dU <= w for the current state.
///
/// Input rows: cumulative sums of dU bounded by u_max - u_prev and
/// u_prev - u_min. Output rows (when enabled): predicted outputs within the
/// workspace, mapped onto dU through Theta.
pub fn build_constraints(
    mats: &PredictionMatrices,
    cfg: &MpcConfig,
    x_hat: &StateVec,
    u_prev: &InputVec,
    f_lift: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let (h_p, h_u) = (mats.h_p, mats.h_u);
    let n_in = 6 * h_u;
    let n_out = if cfg.output_constraints { 6 * h_p } else { 0 };
    let mut w = DMatrix::zeros(n_in + n_out, 3 * h_u);
    let mut rhs = DVector::zeros(n_in + n_out);

    // input rows: for each horizon step i, sum_{j<=i} du_j within bounds
    for i in 0..h_u {
        for j in 0..=i {
            for k in 0..3 {
                w[(3 * i + k, 3 * j + k)] = 1.0;
                w[(n_in / 2 + 3 * i + k, 3 * j + k)] = -1.0;
            }
        }
        for k in 0..3 {
            rhs[3 * i + k] = cfg.u_max[k] - u_prev[k];
            rhs[n_in / 2 + 3 * i + k] = u_prev[k] - cfg.u_min[k];
        }
    }

    if cfg.output_constraints {
        let free = free_response(mats, x_hat, u_prev, f_lift);
        for i in 0..3 * h_p {
            for j in 0..3 * h_u {
                w[(n_in + i, j)] = mats.theta[(i, j)];
                w[(n_in + 3 * h_p + i, j)] = -mats.theta[(i, j)];
            }
            rhs[n_in + i] = cfg.y_max[i % 3] - free[i];
            rhs[n_in + 3 * h_p + i] = free[i] - cfg.y_min[i % 3];
        }
    }
    (w, rhs)
}

/// Predicted outputs with dU = 0: Psi x + Gamma u_prev + Xi F_d.
pub fn free_response(
    mats: &PredictionMatrices,
    x_hat: &StateVec,
    u_prev: &InputVec,
    f_lift: &DVector<f64>,
) -> DVector<f64> {
    let x = DVector::from_column_slice(x_hat.as_slice());
    let u = DVector::from_column_slice(u_prev.as_slice());
    &mats.psi * x + &mats.gamma * u + &mats.xi * f_lift
}

/// QP status of one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    /// Fresh optimum applied.
    Optimal,
    /// Infeasible; consumed the next element of the last successful plan.
    Fallback,
    /// Infeasible with no stored plan; input held.
    Hold,
}

impl QpStatus {
    pub fn as_code(&self) -> u8 {
        match self {
            QpStatus::Optimal => 0,
            QpStatus::Fallback => 1,
            QpStatus::Hold => 2,
        }
    }
}

/// Per-step controller diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MpcDiagnostics {
    pub status: QpStatus,
    pub active_set_size: usize,
    pub cost: f64,
    pub fallback_count: usize,
    pub saturated: bool,
}

/// Receding-horizon controller state.
#[derive(Debug, Clone)]
pub struct MpcController {
    pub cfg: MpcConfig,
    pub mats: PredictionMatrices,
    hessian: DMatrix<f64>,
    theta_t_q: DMatrix<f64>,
    pub u_prev: InputVec,
    /// Unconsumed tail of the last successful dU plan, used on infeasibility.
    pending: Vec<InputVec>,
    pub fallback_count: usize,
}

impl MpcController {
    pub fn new(model: &DiscretePlantModel, cfg: MpcConfig) -> Result<Self> {
        cfg.validate()?;
        let mats = build_prediction(model, cfg.h_p, cfg.h_u);
        // H = Theta' Q Theta + R, with Q and R block-diagonal repeats
        let mut q = DMatrix::zeros(3 * cfg.h_p, 3 * cfg.h_p);
        for i in 0..3 * cfg.h_p {
            q[(i, i)] = cfg.q[i % 3];
        }
        let mut r = DMatrix::zeros(3 * cfg.h_u, 3 * cfg.h_u);
        for i in 0..3 * cfg.h_u {
            r[(i, i)] = cfg.r[i % 3];
        }
        let theta_t_q = mats.theta.transpose() * &q;
        let hessian = &theta_t_q * &mats.theta + r;
        Ok(MpcController {
            cfg,
            mats,
            hessian,
            theta_t_q,
            u_prev: InputVec::zeros(),
            pending: Vec::new(),
            fallback_count: 0,
        })
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn reset(&mut self, u_prev: InputVec) {
        self.u_prev = u_prev;
        self.pending.clear();
        self.fallback_count = 0;
    }

    /// One controller step: returns the voltage to apply.
    ///
    /// `y_ref` must provide the reference outputs for steps k+1 ..= k+H_p.
    pub fn step(
        &mut self,
        x_hat: &StateVec,
        y_ref: &DVector<f64>,
        f_d: &InputVec,
    ) -> (InputVec, MpcDiagnostics) {
        assert_eq!(y_ref.len(), 3 * self.cfg.h_p);
        let f_lift = lift_disturbance(f_d, self.cfg.h_p);
        let free = free_response(&self.mats, x_hat, &self.u_prev, &f_lift);
        let err = free - y_ref;
        let g = &self.theta_t_q * &err;
        let (w, rhs) = build_constraints(&self.mats, &self.cfg, x_hat, &self.u_prev, &f_lift);

        match solve_qp(&self.hessian, &g, &w, &rhs, self.cfg.qp_tol, self.cfg.qp_max_iter) {
            Ok(sol) => {
                let du0 = InputVec::new(sol.x[0], sol.x[1], sol.x[2]);
                let u = self.apply(du0);
                self.pending.clear();
                for j in 1..self.cfg.h_u {
                    self.pending.push(InputVec::new(
                        sol.x[3 * j],
                        sol.x[3 * j + 1],
                        sol.x[3 * j + 2],
                    ));
                }
                let cost = sol.objective + 0.5 * err.dot(&(/* const term */ {
                    let mut q_err = err.clone();
                    for i in 0..q_err.len() {
                        q_err[i] *= self.cfg.q[i % 3];
                    }
                    q_err
                }));
                (
                    u,
                    MpcDiagnostics {
                        status: QpStatus::Optimal,
                        active_set_size: sol.active.len(),
                        cost,
                        fallback_count: self.fallback_count,
                        saturated: sol.active.iter().any(|(i, _)| *i < 6 * self.cfg.h_u),
                    },
                )
            }
            Err(_) => {
                self.fallback_count += 1;
                let status = if self.pending.is_empty() {
                    QpStatus::Hold
                } else {
                    QpStatus::Fallback
                };
                let du = if self.pending.is_empty() {
                    InputVec::zeros()
                } else {
                    self.pending.remove(0)
                };
                let u = self.apply(du);
                (
                    u,
                    MpcDiagnostics {
                        status,
                        active_set_size: 0,
                        cost: f64::NAN,
                        fallback_count: self.fallback_count,
                        saturated: false,
                    },
                )
            }
        }
    }

    /// Integrate a move onto the previous input, with a final hard clamp to
    /// the voltage bounds.
    fn apply(&mut self, du: InputVec) -> InputVec {
        let mut u = self.u_prev + du;
        for k in 0..3 {
            u[k] = u[k].clamp(self.cfg.u_min[k], self.cfg.u_max[k]);
        }
        self.u_prev = u;
        u
    }
}

/// Luenberger predictor for the 6-state model:
/// x(k+1|k) = (A - LC) x(k|k-1) + B u + W_d f_d + L y(k).
#[derive(Debug, Clone)]
pub struct StateObserver {
    pub l: SMatrix<f64, 6, 3>,
    pub x_hat: StateVec,
}

impl StateObserver {
    /// Block-diagonal gain from per-axis pairs.
    pub fn from_axis_gains(gains: [[f64; 2]; 3]) -> Self {
        let mut l = SMatrix::<f64, 6, 3>::zeros();
        for (i, g) in gains.iter().enumerate() {
            l[(2 * i, i)] = g[0];
            l[(2 * i + 1, i)] = g[1];
        }
        StateObserver {
            l,
            x_hat: StateVec::zeros(),
        }
    }

    /// Desk-rig observer gains.
    pub fn desk_rig() -> Self {
        Self::from_axis_gains([[42.9e-2, 26.5e-2], [41.5e-2, 27.7e-2], [43.5e-2, 29.7e-2]])
    }

    /// Advance the predictor by one sample.
    pub fn step(
        &mut self,
        model: &DiscretePlantModel,
        u: &InputVec,
        f_d: &InputVec,
        y: &OutputVec,
    ) -> StateVec {
        let innovation = y - model.c * self.x_hat;
        self.x_hat = model.a * self.x_hat + model.b * u + model.w_d * f_d + self.l * innovation;
        self.x_hat
    }

    /// Spectral radius of (A - LC); must be < 1 for a usable observer.
    pub fn error_spectral_radius(&self, model: &DiscretePlantModel) -> f64 {
        let a = model.a_dyn();
        let c = model.c_dyn();
        let l = DMatrix::from_iterator(6, 3, self.l.iter().cloned());
        let e = a - l * c;
        e.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
