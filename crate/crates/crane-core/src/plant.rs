//! Ground-truth nonlinear continuous-time crane simulator.
//!
//! The five degrees of freedom are trolley position (x, y), rope length l and
//! the two swing angles (theta_x, theta_y). Each linear axis is driven by a
//! geared PM DC motor folded into effective torque-balance coefficients
//! (J_e, B_e, K_e); the load couples the axes through the nonlinear
//! disturbance torques f_d and the swing dynamics.
//!
//! The trolley/hoist accelerations appear linearly in all three torque
//! balances, so each derivative evaluation assembles and solves a 3x3 linear
//! system before evaluating the swing accelerations.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::params::CraneParameters;

/// Simulation mode: full 3D crane or the planar (traveling + hoisting)
/// degenerate case with the y channel frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CraneMode {
    ThreeD,
    TwoD,
}

/// Continuous plant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraneState {
    pub x: f64,
    pub v_x: f64,
    pub y: f64,
    pub v_y: f64,
    pub l: f64,
    pub v_l: f64,
    pub theta_x: f64,
    pub theta_x_dot: f64,
    pub theta_y: f64,
    pub theta_y_dot: f64,
}

impl CraneState {
    /// Crane at rest with the trolley at (x, y) and rope length l.
    pub fn at_rest(x: f64, y: f64, l: f64) -> Self {
        CraneState {
            x,
            v_x: 0.0,
            y,
            v_y: 0.0,
            l,
            v_l: 0.0,
            theta_x: 0.0,
            theta_x_dot: 0.0,
            theta_y: 0.0,
            theta_y_dot: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.x,
            self.v_x,
            self.y,
            self.v_y,
            self.l,
            self.v_l,
            self.theta_x,
            self.theta_x_dot,
            self.theta_y,
            self.theta_y_dot,
        ]
    }

    pub fn from_array(a: &[f64; 10]) -> Self {
        CraneState {
            x: a[0],
            v_x: a[1],
            y: a[2],
            v_y: a[3],
            l: a[4],
            v_l: a[5],
            theta_x: a[6],
            theta_x_dot: a[7],
            theta_y: a[8],
            theta_y_dot: a[9],
        }
    }
}

/// Motor voltages applied to the three axes, V.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantInput {
    pub v_ax: f64,
    pub v_ay: f64,
    pub v_al: f64,
}

impl PlantInput {
    pub fn new(v_ax: f64, v_ay: f64, v_al: f64) -> Self {
        PlantInput { v_ax, v_ay, v_al }
    }
}

/// Load position in the fixed reference frame (z is negative below the
/// trolley plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPosition {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

/// Simulator guards and integration options.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlantConfig {
    pub mode: CraneMode,
    /// Velocity deadband below which coulomb friction is zero, m/s.
    pub friction_deadband: f64,
    /// Abort margin on |theta| relative to pi/2, rad.
    pub swing_margin: f64,
    /// Minimum admissible rope length, m.
    pub l_min: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            mode: CraneMode::ThreeD,
            friction_deadband: 1e-4,
            swing_margin: 0.05,
            l_min: 1e-3,
        }
    }
}

/// Coulomb friction torque: a1 for positive velocity, -a2 for negative, zero
/// inside the deadband (the model is undefined at v = 0; the deadband avoids
/// integration chatter).
pub fn coulomb_friction(v: f64, a_1: f64, a_2: f64, deadband: f64) -> f64 {
    debug_assert!(a_1 >= 0.0 && a_2 >= 0.0 && deadband >= 0.0);
    if v > deadband {
        a_1
    } else if v < -deadband {
        -a_2
    } else {
        0.0
    }
}

/// Load position from the trolley position, rope length and swing angles.
pub fn load_position(s: &CraneState) -> LoadPosition {
    let (sx, cx) = s.theta_x.sin_cos();
    let (sy, cy) = s.theta_y.sin_cos();
    LoadPosition {
        x_m: s.x + s.l * sx * cy,
        y_m: s.y + s.l * sy,
        z_m: -s.l * cx * cy,
    }
}

fn check_domain(s: &CraneState, cfg: &PlantConfig) -> Result<()> {
    let lim = std::f64::consts::FRAC_PI_2 - cfg.swing_margin;
    if s.theta_x.abs() > lim || s.theta_y.abs() > lim {
        return Err(CraneError::StateOutOfDomain(format!(
            "swing angle magnitude ({:.4}, {:.4}) exceeds {:.4} rad",
            s.theta_x, s.theta_y, lim
        )));
    }
    if s.l < cfg.l_min {
        return Err(CraneError::StateOutOfDomain(format!(
            "rope length {:.6} below minimum {:.6}",
            s.l, cfg.l_min
        )));
    }
    Ok(())
}

/// Time derivative of the full plant state under constant motor voltages.
///
/// Solves the implicit 3x3 system coupling (x_dd, y_dd, l_dd) through the
/// load, then evaluates the swing accelerations from the simplified swing
/// dynamics (which contain trolley accelerations but no swing accelerations).
/// In 2D mode the y/theta_y components are identically zero.
pub fn continuous_derivative(
    s: &CraneState,
    u: &PlantInput,
    p: &CraneParameters,
    cfg: &PlantConfig,
) -> Result<[f64; 10]> {
    let mut s = *s;
    let mut u = *u;
    if cfg.mode == CraneMode::TwoD {
        s.y = 0.0;
        s.v_y = 0.0;
        s.theta_y = 0.0;
        s.theta_y_dot = 0.0;
        u.v_ay = 0.0;
    }
    check_domain(&s, cfg)?;

    let (sx, cx) = s.theta_x.sin_cos();
    let (sy, cy) = s.theta_y.sin_cos();
    let m = p.m;
    let g = p.g;
    let l = s.l;
    let tdx = s.theta_x_dot;
    let tdy = s.theta_y_dot;

    let c_x = p.x.gear_pulley();
    let c_y = p.y.gear_pulley();
    let c_l = p.l.gear_pulley();

    // Rank-one load coupling: row i of the mass matrix is
    // J_ei * e_i + m * c_i * w_i * w, with w the rope direction factors.
    let w = Vector3::new(sx * cy, sy, 1.0);
    let cw = Vector3::new(c_x * w[0], c_y * w[1], c_l * w[2]);
    let mass = Matrix3::from_diagonal(&Vector3::new(p.x.j_e, p.y.j_e, p.l.j_e)) + m * cw * w.transpose();

    let f_cfx = coulomb_friction(s.v_x, p.x.a_1, p.x.a_2, cfg.friction_deadband);
    let f_cfy = coulomb_friction(s.v_y, p.y.a_1, p.y.a_2, cfg.friction_deadband);
    let f_cfl = coulomb_friction(s.v_l, p.l.a_1, p.l.a_2, cfg.friction_deadband);

    // Acceleration-free parts of the load disturbance torques.
    let d_x = c_x * m * (-l * sx * cy.powi(3) * tdx * tdx - l * sx * cy * tdy * tdy - g * sx * cx * cy * cy);
    let d_y = c_y * m * (-l * sy * cy * cy * tdx * tdx - l * sy * tdy * tdy - g * cx * sy * cy);
    let d_l = c_l * m * (-l * cy * cy * tdx * tdx - l * tdy * tdy - g * cx * cy);

    let rhs = Vector3::new(
        p.x.k_e * u.v_ax - p.x.b_e * s.v_x - f_cfx - d_x,
        p.y.k_e * u.v_ay - p.y.b_e * s.v_y - f_cfy - d_y,
        p.l.k_e * u.v_al - p.l.b_e * s.v_l - f_cfl - d_l,
    );

    let acc = mass.lu().solve(&rhs).ok_or(CraneError::SingularMassMatrix)?;
    let (ax, ay, al) = (acc[0], acc[1], acc[2]);

    // Simplified swing dynamics; cy and l are bounded away from zero by the
    // domain guard.
    let tddx = (-cx * ax - 2.0 * s.v_l * cy * tdx + 2.0 * l * sy * tdx * tdy - g * sx) / (l * cy);
    let tddy = (sx * sy * ax - cy * ay - 2.0 * s.v_l * tdy - l * sy * cy * tdx * tdx - g * cx * sy) / l;

    let mut d = [s.v_x, ax, s.v_y, ay, s.v_l, al, tdx, tddx, tdy, tddy];
    if cfg.mode == CraneMode::TwoD {
        d[2] = 0.0;
        d[3] = 0.0;
        d[8] = 0.0;
        d[9] = 0.0;
    }
    Ok(d)
}

/// Advance the plant by `dt` with the input held constant, using classical
/// RK4 with `substeps` internal steps. Deterministic: identical inputs give
/// bit-identical outputs.
pub fn step(
    s: &CraneState,
    u: &PlantInput,
    p: &CraneParameters,
    cfg: &PlantConfig,
    dt: f64,
    substeps: usize,
) -> Result<CraneState> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(CraneError::InvalidParameter(format!(
            "dt = {dt}, substeps = {substeps}"
        )));
    }
    let h = dt / substeps as f64;
    let mut state = s.to_array();
    for _ in 0..substeps {
        let k1 = continuous_derivative(&CraneState::from_array(&state), u, p, cfg)?;
        let k2 = continuous_derivative(&advance(&state, &k1, h / 2.0), u, p, cfg)?;
        let k3 = continuous_derivative(&advance(&state, &k2, h / 2.0), u, p, cfg)?;
        let k4 = continuous_derivative(&advance(&state, &k3, h), u, p, cfg)?;
        for i in 0..10 {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(CraneState::from_array(&state))
}

fn advance(s: &[f64; 10], d: &[f64; 10], h: f64) -> CraneState {
    let mut out = [0.0; 10];
    for i in 0..10 {
        out[i] = s[i] + h * d[i];
    }
    CraneState::from_array(&out)
}

/// Total mechanical energy (kinetic including reflected rotor inertia, plus
/// load potential), J. Conserved when damping, friction and inputs are zero;
/// used by the integration audits.
pub fn total_energy(s: &CraneState, p: &CraneParameters) -> f64 {
    let (sx, cx) = s.theta_x.sin_cos();
    let (sy, cy) = s.theta_y.sin_cos();
    let (l, vl) = (s.l, s.v_l);
    let (tdx, tdy) = (s.theta_x_dot, s.theta_y_dot);

    // |v_m|^2: load speed squared in the fixed frame.
    let vm2 = s.v_x * s.v_x
        + s.v_y * s.v_y
        + vl * vl
        + l * l * cy * cy * tdx * tdx
        + l * l * tdy * tdy
        + 2.0 * s.v_x * (vl * sx * cy + l * cx * cy * tdx - l * sx * sy * tdy)
        + 2.0 * s.v_y * (vl * sy + l * cy * tdy);

    let mu_x = p.x.equivalent_mass();
    let mu_y = p.y.equivalent_mass();
    let mu_l = p.l.equivalent_mass();

    0.5 * (mu_x * s.v_x * s.v_x + mu_y * s.v_y * s.v_y + mu_l * vl * vl) + 0.5 * p.m * vm2
        - p.m * p.g * l * cx * cy
}
