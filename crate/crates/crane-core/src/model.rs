//! Discrete-time independent-joint state-space model.
//!
//! Each axis is a first-order velocity loop behind an integrator. ZOH
//! discretization of the velocity loop gives the per-axis coefficients
//! (a_1, b_1, b_d1); the assembled 6-state model is block-diagonal with
//! state ordering (x, v_x, y, v_y, l, v_l) and outputs (x, y, l).
//!
//! Sign convention: the state update is x(k+1) = A x(k) + B u(k) + W_d f_d(k)
//! with f_d the lumped disturbance torque (load coupling plus coulomb
//! friction). The disturbance OPPOSES the drive, so the W_d velocity entries
//! are -b_d1. This is what makes the feedforward identity B*Lambda_ff = -W_d
//! and the disturbance-observer loop algebra come out exactly.

use nalgebra::{DMatrix, Matrix2, SMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::params::CraneParameters;

/// ZOH coefficients of one axis velocity loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDiscretization {
    pub a_1: f64,
    pub b_1: f64,
    pub b_d1: f64,
    pub t_s: f64,
}

/// Zero-order-hold equivalent of J_e v_dot + B_e v = K_e u - f_d:
/// a_1 = exp(-B T/J), b_1 = (K/B)(1 - a_1), b_d1 = (1/B)(1 - a_1).
pub fn discretize_axis(j_e: f64, b_e: f64, k_e: f64, t_s: f64) -> Result<AxisDiscretization> {
    for (name, v) in [("j_e", j_e), ("b_e", b_e), ("k_e", k_e), ("t_s", t_s)] {
        if !(v > 0.0) {
            return Err(CraneError::InvalidParameter(format!("{name} = {v}")));
        }
    }
    let a_1 = (-b_e * t_s / j_e).exp();
    Ok(AxisDiscretization {
        a_1,
        b_1: k_e / b_e * (1.0 - a_1),
        b_d1: (1.0 - a_1) / b_e,
        t_s,
    })
}

/// Backward-difference (implicit Euler) coefficients of the same axis; this
/// is the map the identification-side regression inverts. Agrees with the
/// ZOH map to O(T_s^2) but is not identical.
pub fn backward_difference_axis(j_e: f64, b_e: f64, k_e: f64, t_s: f64) -> Result<AxisDiscretization> {
    for (name, v) in [("j_e", j_e), ("b_e", b_e), ("k_e", k_e), ("t_s", t_s)] {
        if !(v > 0.0) {
            return Err(CraneError::InvalidParameter(format!("{name} = {v}")));
        }
    }
    let den = j_e + t_s * b_e;
    Ok(AxisDiscretization {
        a_1: j_e / den,
        b_1: k_e * t_s / den,
        b_d1: t_s / den,
        t_s,
    })
}

/// Assembled block-diagonal discrete model of the three axes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlantModel {
    pub a: SMatrix<f64, 6, 6>,
    pub b: SMatrix<f64, 6, 3>,
    pub w_d: SMatrix<f64, 6, 3>,
    pub c: SMatrix<f64, 3, 6>,
    pub t_s: f64,
    pub axes: [AxisDiscretization; 3],
}

/// Build the 6-state model from the three axis discretizations
/// (traveling, traversing, hoisting order).
pub fn assemble_model(axes: [AxisDiscretization; 3], t_s: f64) -> Result<DiscretePlantModel> {
    if axes.iter().any(|ax| ax.t_s != t_s) {
        return Err(CraneError::MismatchedSampleTime);
    }
    let mut a = SMatrix::<f64, 6, 6>::zeros();
    let mut b = SMatrix::<f64, 6, 3>::zeros();
    let mut w_d = SMatrix::<f64, 6, 3>::zeros();
    let mut c = SMatrix::<f64, 3, 6>::zeros();
    for (i, ax) in axes.iter().enumerate() {
        let r = 2 * i;
        a[(r, r)] = 1.0;
        a[(r, r + 1)] = t_s;
        a[(r + 1, r + 1)] = ax.a_1;
        b[(r + 1, i)] = ax.b_1;
        w_d[(r + 1, i)] = -ax.b_d1;
        c[(i, r)] = 1.0;
    }
    Ok(DiscretePlantModel { a, b, w_d, c, t_s, axes })
}

impl DiscretePlantModel {
    /// Model with the given sample time from physical crane parameters.
    pub fn from_parameters(p: &CraneParameters, t_s: f64) -> Result<Self> {
        let ax = discretize_axis(p.x.j_e, p.x.b_e, p.x.k_e, t_s)?;
        let ay = discretize_axis(p.y.j_e, p.y.b_e, p.y.k_e, t_s)?;
        let al = discretize_axis(p.l.j_e, p.l.b_e, p.l.k_e, t_s)?;
        assemble_model([ax, ay, al], t_s)
    }

    /// One model update: x(k+1) = A x + B u + W_d f_d.
    pub fn update(
        &self,
        x: &SMatrix<f64, 6, 1>,
        u: &SMatrix<f64, 3, 1>,
        f_d: &SMatrix<f64, 3, 1>,
    ) -> SMatrix<f64, 6, 1> {
        self.a * x + self.b * u + self.w_d * f_d
    }

    /// Per-axis 2x2 blocks (A_i, B_i, Wd_i), i = 0, 1, 2.
    pub fn axis_block(&self, i: usize) -> (Matrix2<f64>, Vector2<f64>, Vector2<f64>) {
        let ax = &self.axes[i];
        (
            Matrix2::new(1.0, self.t_s, 0.0, ax.a_1),
            Vector2::new(0.0, ax.b_1),
            Vector2::new(0.0, -ax.b_d1),
        )
    }

    pub fn a_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(6, 6, self.a.iter().cloned())
    }
    pub fn b_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(6, 3, self.b.iter().cloned())
    }
    pub fn w_d_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(6, 3, self.w_d.iter().cloned())
    }
    pub fn c_dyn(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(3, 6, self.c.iter().cloned())
    }
}
