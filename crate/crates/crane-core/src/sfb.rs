//! Two-degree-of-freedom state feedback control with feedforward.
//!
//! The feedback part drives the estimated state toward the reference-model
//! state; the feedforward part inverts the per-axis discrete model along the
//! reference trajectory and cancels the estimated load disturbance. The
//! disturbance estimate comes either from computed torque (evaluating the
//! known nonlinear coupling along the reference) or from a disturbance
//! observer integrating the output estimation error.

use nalgebra::{DMatrix, Matrix2, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::model::DiscretePlantModel;
use crate::mpc::{InputVec, OutputVec, StateObserver, StateVec};
use crate::params::CraneParameters;
use crate::plant::coulomb_friction;
use crate::swing::SwingEstimate;
use crate::traj::ReferenceState;

/// State feedback and observer gain set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SfbConfig {
    /// Per-axis feedback gain rows [k_pos, k_vel].
    pub k: [[f64; 2]; 3],
    /// Per-axis observer gain columns [l_1, l_2].
    pub l: [[f64; 2]; 3],
    /// Diagonal disturbance-observer gains, all negative.
    pub l_w: [f64; 3],
    pub u_max: f64,
}

impl SfbConfig {
    /// Desk-rig gains.
    pub fn desk_rig() -> Self {
        SfbConfig {
            k: [[12.9e2, 1.1e2], [25.9e2, 1.2e2], [38.4e2, 1.2e2]],
            l: [[42.9e-2, 26.5e-2], [41.5e-2, 27.7e-2], [43.5e-2, 29.7e-2]],
            l_w: [-10e-2, -10e-2, -50e-2],
            u_max: 24.0,
        }
    }

    pub fn k_matrix(&self) -> SMatrix<f64, 3, 6> {
        let mut k = SMatrix::<f64, 3, 6>::zeros();
        for (i, row) in self.k.iter().enumerate() {
            k[(i, 2 * i)] = row[0];
            k[(i, 2 * i + 1)] = row[1];
        }
        k
    }

    pub fn observer(&self) -> StateObserver {
        StateObserver::from_axis_gains(self.l)
    }

    /// Place per-axis feedback gains for the given closed-loop pole pair
    /// (Ackermann on the 2x2 axis blocks); keeps the table's observer gains.
    pub fn place_feedback(model: &DiscretePlantModel, p_1: f64, p_2: f64) -> [[f64; 2]; 3] {
        let mut k = [[0.0; 2]; 3];
        for i in 0..3 {
            let ax = &model.axes[i];
            let t_s = model.t_s;
            // desired z^2 + c1 z + c0
            let c1 = -(p_1 + p_2);
            let c0 = p_1 * p_2;
            // A = [[1, T], [0, a]], B = [0, b]: char(A - B k) =
            // z^2 - (1 + a - b k2) z + (a - b k2 + b T k1)
            let k2 = (1.0 + ax.a_1 + c1) / ax.b_1;
            let k1 = (c0 - ax.a_1 + ax.b_1 * k2) / (ax.b_1 * t_s);
            k[i] = [k1, k2];
        }
        k
    }
}

/// Feedforward gain set satisfying A_m - B*Phi = A, B_m = B*Gamma,
/// B*Lambda = -W_d.
#[derive(Debug, Clone, Copy)]
pub struct FeedforwardGains {
    pub phi: SMatrix<f64, 3, 6>,
    /// Diagonal entries of Gamma_ff.
    pub gamma: [f64; 3],
    /// Diagonal entries of Lambda_ff.
    pub lambda: [f64; 3],
}

/// Per axis: Phi_i = [0, (1 - a_1)/b_1], gamma_i = T_s/b_1,
/// lambda_i = b_d1/b_1.
pub fn feedforward_gains(model: &DiscretePlantModel) -> Result<FeedforwardGains> {
    let mut phi = SMatrix::<f64, 3, 6>::zeros();
    let mut gamma = [0.0; 3];
    let mut lambda = [0.0; 3];
    for i in 0..3 {
        let ax = &model.axes[i];
        if !(ax.b_1 > 0.0) {
            return Err(CraneError::DegenerateModel(format!("b_1[{i}] = {}", ax.b_1)));
        }
        phi[(i, 2 * i + 1)] = (1.0 - ax.a_1) / ax.b_1;
        gamma[i] = model.t_s / ax.b_1;
        lambda[i] = ax.b_d1 / ax.b_1;
    }
    Ok(FeedforwardGains { phi, gamma, lambda })
}

/// u_ff = Phi x_rm + Gamma u_c + Lambda f_d.
pub fn feedforward_signal(
    x_rm: &ReferenceState,
    u_c: [f64; 3],
    f_d: &InputVec,
    gains: &FeedforwardGains,
) -> InputVec {
    let xv = x_rm.as_state_vector();
    let x = StateVec::from_column_slice(&xv);
    let mut out = gains.phi * x;
    for i in 0..3 {
        out[i] += gains.gamma[i] * u_c[i] + gains.lambda[i] * f_d[i];
    }
    out
}

/// Feedback + feedforward with saturation: u = K(x_rm - x_hat) + u_ff.
/// Returns the applied voltage and whether any channel saturated.
pub fn sfb_step(
    x_hat: &StateVec,
    x_rm: &ReferenceState,
    u_ff: &InputVec,
    k: &SMatrix<f64, 3, 6>,
    u_max: f64,
) -> (InputVec, bool) {
    let xv = x_rm.as_state_vector();
    let xr = StateVec::from_column_slice(&xv);
    let raw = k * (xr - x_hat) + u_ff;
    let mut u = raw;
    let mut saturated = false;
    for i in 0..3 {
        if raw[i].abs() > u_max {
            saturated = true;
            u[i] = raw[i].clamp(-u_max, u_max);
        }
    }
    (u, saturated)
}

/// Where a disturbance estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisturbanceSource {
    ComputedTorque,
    Observer,
    Zero,
}

/// Lumped disturbance estimate per axis (N.m), with provenance.
#[derive(Debug, Clone, Copy)]
pub struct DisturbanceEstimate {
    pub f_d: InputVec,
    pub source: DisturbanceSource,
}

impl DisturbanceEstimate {
    pub fn zero() -> Self {
        DisturbanceEstimate {
            f_d: InputVec::zeros(),
            source: DisturbanceSource::Zero,
        }
    }
}

/// Computed-torque disturbance: evaluate the nonlinear load coupling along
/// the reference trajectory with the observed swing state, plus coulomb
/// friction at the reference velocities.
///
/// The trolley/hoist accelerations are taken from the command signal and the
/// rope length/velocities from the reference model, so no swing
/// accelerations are needed.
pub fn computed_torque(
    x_rm: &ReferenceState,
    u_c: [f64; 3],
    swing: &SwingEstimate,
    p: &CraneParameters,
    deadband: f64,
) -> DisturbanceEstimate {
    let (sx, cx) = swing.theta_x.sin_cos();
    let (sy, cy) = swing.theta_y.sin_cos();
    let (tdx, tdy) = (swing.theta_x_dot, swing.theta_y_dot);
    let m = p.m;
    let g = p.g;
    let l = x_rm.l_ref;
    let (ax, ay, al) = (u_c[0], u_c[1], u_c[2]);

    let f_dx = p.x.gear_pulley()
        * m
        * (sx * sx * cy * cy * ax + sx * sy * cy * ay + sx * cy * al
            - l * sx * cy.powi(3) * tdx * tdx
            - l * sx * cy * tdy * tdy
            - g * sx * cx * cy * cy);
    let f_dy = p.y.gear_pulley()
        * m
        * (sx * sy * cy * ax + sy * sy * ay + sy * al
            - l * sy * cy * cy * tdx * tdx
            - l * sy * tdy * tdy
            - g * cx * sy * cy);
    let f_dl = p.l.gear_pulley()
        * m
        * (sx * cy * ax + sy * ay + al - l * cy * cy * tdx * tdx - l * tdy * tdy - g * cx * cy);

    let f_cfx = coulomb_friction(x_rm.v_xref, p.x.a_1, p.x.a_2, deadband);
    let f_cfy = coulomb_friction(x_rm.v_yref, p.y.a_1, p.y.a_2, deadband);
    let f_cfl = coulomb_friction(x_rm.v_lref, p.l.a_1, p.l.a_2, deadband);

    DisturbanceEstimate {
        f_d: InputVec::new(f_dx + f_cfx, f_dy + f_cfy, f_dl + f_cfl),
        source: DisturbanceSource::ComputedTorque,
    }
}

/// One disturbance-observer update: f_d += L_w (y - C x_hat).
/// `x_hat` must be the companion state observer's current prediction.
pub fn dob_step(
    f_d: &InputVec,
    y: &OutputVec,
    x_hat: &StateVec,
    c: &SMatrix<f64, 3, 6>,
    l_w: &[f64; 3],
) -> InputVec {
    let innovation = y - c * x_hat;
    let mut next = *f_d;
    for i in 0..3 {
        next[i] += l_w[i] * innovation[i];
    }
    next
}

/// Roots of the per-axis disturbance-observer closed-loop cubic
/// z^3 + (l1 - 2 - a1) z^2 + (1 - l1 (1 + a1) + 2 a1 + l2 T) z
///     + a1 (l1 - 1) - T (l2 + l_w b_d1).
pub fn dob_poles(model: &DiscretePlantModel, axis: usize, l_gain: [f64; 2], l_w: f64) -> [f64; 3] {
    let ax = &model.axes[axis];
    let (a1, t_s, b_d1) = (ax.a_1, model.t_s, ax.b_d1);
    let (l1, l2) = (l_gain[0], l_gain[1]);
    let c2 = l1 - 2.0 - a1;
    let c1 = 1.0 - l1 * (1.0 + a1) + 2.0 * a1 + l2 * t_s;
    let c0 = a1 * (l1 - 1.0) - t_s * (l2 + l_w * b_d1);
    // companion-matrix eigenvalues
    let comp = nalgebra::Matrix3::new(
        -c2, -c1, -c0, //
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0,
    );
    let eig = comp.complex_eigenvalues();
    let mut mags = [0.0; 3];
    for (i, z) in eig.iter().enumerate() {
        mags[i] = z.norm();
    }
    mags
}

/// Audit the disturbance-observer loop of each axis: all closed-loop pole
/// moduli < 1 and the gain negative.
pub fn dob_pole_audit(model: &DiscretePlantModel, cfg: &SfbConfig) -> [(bool, [f64; 3]); 3] {
    let mut out = [(false, [0.0; 3]); 3];
    for i in 0..3 {
        let mags = dob_poles(model, i, cfg.l[i], cfg.l_w[i]);
        let ok = cfg.l_w[i] < 0.0 && mags.iter().all(|m| *m < 1.0);
        out[i] = (ok, mags);
    }
    out
}

/// Spectral radii of (A - BK), (A - LC) and (A - BK - LC).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilityAudit {
    pub rho_a_bk: f64,
    pub rho_a_lc: f64,
    pub rho_a_bk_lc: f64,
}

impl StabilityAudit {
    pub fn passed(&self) -> bool {
        self.rho_a_bk < 1.0 && self.rho_a_lc < 1.0 && self.rho_a_bk_lc < 1.0
    }
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Compute the three closed-loop spectral radii for the given gains.
pub fn stability_audit(
    model: &DiscretePlantModel,
    k: &SMatrix<f64, 3, 6>,
    l: &SMatrix<f64, 6, 3>,
) -> StabilityAudit {
    let a = model.a_dyn();
    let b = model.b_dyn();
    let c = model.c_dyn();
    let kd = DMatrix::from_iterator(3, 6, k.iter().cloned());
    let ld = DMatrix::from_iterator(6, 3, l.iter().cloned());
    let bk = &b * &kd;
    let lc = &ld * &c;
    StabilityAudit {
        rho_a_bk: spectral_radius(&(&a - &bk)),
        rho_a_lc: spectral_radius(&(&a - &lc)),
        rho_a_bk_lc: spectral_radius(&(&a - &bk - &lc)),
    }
}
