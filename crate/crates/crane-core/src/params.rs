//! Physical parameters of the crane axes and load.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};

/// Which linear motion an axis parameter set belongs to.
///
/// Traveling is trolley motion along the rail (X), traversing along the
/// girder (Y), hoisting is the rope length (l).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    Traveling,
    Traversing,
    Hoisting,
}

/// Effective single-axis actuator parameters: the motor, gearbox, pulley and
/// the structure mass it drives, lumped into a first-order torque balance
/// `J_e v_dot + B_e v = K_e v_a - f_d - f_cf`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AxisParams {
    /// Total effective moment of inertia, kg.m.
    pub j_e: f64,
    /// Total effective viscous damping, N.s.
    pub b_e: f64,
    /// Voltage-to-torque gain K_m/R_m, N.m/(A.Ohm).
    pub k_e: f64,
    /// Coulomb friction constant, positive direction of motion, N.m.
    pub a_1: f64,
    /// Coulomb friction constant, negative direction of motion, N.m.
    pub a_2: f64,
    /// Gear reduction ratio, 0 < r_g < 1.
    pub r_g: f64,
    /// Pulley radius, m.
    pub r_p: f64,
}

impl AxisParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.j_e > 0.0) {
            return Err(CraneError::InvalidParameter(format!("j_e = {}", self.j_e)));
        }
        if !(self.b_e > 0.0) {
            return Err(CraneError::InvalidParameter(format!("b_e = {}", self.b_e)));
        }
        if !(self.k_e > 0.0) {
            return Err(CraneError::InvalidParameter(format!("k_e = {}", self.k_e)));
        }
        if self.a_1 < 0.0 || self.a_2 < 0.0 {
            return Err(CraneError::InvalidParameter(
                "coulomb constants must be non-negative".into(),
            ));
        }
        if !(self.r_g > 0.0 && self.r_g < 1.0) {
            return Err(CraneError::InvalidParameter(format!("r_g = {}", self.r_g)));
        }
        if !(self.r_p > 0.0) {
            return Err(CraneError::InvalidParameter(format!("r_p = {}", self.r_p)));
        }
        Ok(())
    }

    /// Gear-times-pulley factor converting linear force to motor-side torque.
    #[inline]
    pub fn gear_pulley(&self) -> f64 {
        self.r_g * self.r_p
    }

    /// Translational-equivalent mass seen on this axis (structure plus
    /// reflected rotor inertia), kg.
    #[inline]
    pub fn equivalent_mass(&self) -> f64 {
        self.j_e / self.gear_pulley()
    }
}

/// Full parameter set of the crane: three axes, load mass and gravity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CraneParameters {
    pub x: AxisParams,
    pub y: AxisParams,
    pub l: AxisParams,
    /// Load mass, kg (>= 0; zero means bare hook).
    pub m: f64,
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
}

impl CraneParameters {
    /// Identified desk-scale rig parameters used throughout the test
    /// scenarios (load mass set separately per run).
    pub fn desk_rig(m: f64) -> Self {
        CraneParameters {
            x: AxisParams {
                j_e: 75e-4,
                b_e: 96.3e-3,
                k_e: 14e-4,
                a_1: 23e-4,
                a_2: 21e-4,
                r_g: 13e-3,
                r_p: 37.5e-3,
            },
            y: AxisParams {
                j_e: 40e-4,
                b_e: 97.5e-3,
                k_e: 14e-4,
                a_1: 14e-4,
                a_2: 11e-4,
                r_g: 13e-3,
                r_p: 37.5e-3,
            },
            l: AxisParams {
                j_e: 65e-4,
                b_e: 24.55e-2,
                k_e: 14e-4,
                a_1: 13e-4,
                a_2: 14e-4,
                r_g: 13e-3,
                r_p: 13.5e-3,
            },
            m,
            g: 9.81,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.y.validate()?;
        self.l.validate()?;
        if self.m < 0.0 {
            return Err(CraneError::InvalidParameter(format!("m = {}", self.m)));
        }
        if !(self.g > 0.0) {
            return Err(CraneError::InvalidParameter(format!("g = {}", self.g)));
        }
        Ok(())
    }

    pub fn axis(&self, kind: AxisKind) -> &AxisParams {
        match kind {
            AxisKind::Traveling => &self.x,
            AxisKind::Traversing => &self.y,
            AxisKind::Hoisting => &self.l,
        }
    }

    /// Scale the true plant relative to the model the controllers use;
    /// exercises robustness claims without touching controller configs.
    pub fn perturbed(&self, factor: f64) -> Self {
        let scale = |a: &AxisParams| AxisParams {
            j_e: a.j_e * factor,
            b_e: a.b_e * factor,
            ..*a
        };
        CraneParameters {
            x: scale(&self.x),
            y: scale(&self.y),
            l: scale(&self.l),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_rig_is_valid() {
        CraneParameters::desk_rig(0.8).validate().unwrap();
        CraneParameters::desk_rig(0.0).validate().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = CraneParameters::desk_rig(0.8);
        p.x.j_e = 0.0;
        assert!(p.validate().is_err());
        let mut p = CraneParameters::desk_rig(0.8);
        p.l.r_g = 1.0;
        assert!(p.validate().is_err());
        let mut p = CraneParameters::desk_rig(0.8);
        p.m = -0.1;
        assert!(p.validate().is_err());
    }
}
