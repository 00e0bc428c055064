//! Trajectory specification and evaluation, the discrete reference model,
//! and deceleration-zone replanning.
//!
//! Trolley axes follow linear-segments-with-parabolic-blends (trapezoidal
//! velocity) profiles; hoisting follows minimum-time (triangular velocity)
//! profiles during the acceleration and deceleration zones. The reference
//! model is a per-axis discrete double integrator driven by commanded
//! accelerations; when swing damping has deviated the reference, the
//! deceleration zone is replanned so the reference still lands on the
//! original endpoint within velocity and acceleration limits.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};

/// Trapezoidal-velocity profile (accelerate / cruise / decelerate).
/// `a` and `v_m` are magnitudes; the sign of (q_f - q_0) sets direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspbSpec {
    pub q_0: f64,
    pub q_f: f64,
    pub a: f64,
    pub v_m: f64,
    pub t_b: f64,
    pub t_f: f64,
}

impl LspbSpec {
    pub fn direction(&self) -> f64 {
        if self.q_f >= self.q_0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Triangular-velocity profile: accelerate to a·t_f/2 at midpoint, then
/// decelerate; v_m is derived, not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinTimeSpec {
    pub q_0: f64,
    pub q_f: f64,
    pub a: f64,
    pub t_f: f64,
}

impl MinTimeSpec {
    /// Consistent spec from endpoints and duration: a = 4|dq|/t_f^2.
    pub fn from_endpoints(q_0: f64, q_f: f64, t_f: f64) -> Result<Self> {
        if !(t_f > 0.0) {
            return Err(CraneError::InvalidParameter(format!("t_f = {t_f}")));
        }
        Ok(MinTimeSpec {
            q_0,
            q_f,
            a: 4.0 * (q_f - q_0).abs() / (t_f * t_f),
            t_f,
        })
    }

    pub fn v_peak(&self) -> f64 {
        self.a * self.t_f / 2.0
    }

    pub fn direction(&self) -> f64 {
        if self.q_f >= self.q_0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Evaluate an LSPB profile: position, velocity, acceleration at time t.
pub fn lspb_eval(spec: &LspbSpec, t: f64) -> Result<(f64, f64, f64)> {
    if t < 0.0 || t > spec.t_f {
        return Err(CraneError::OutOfRange(format!(
            "t = {t} outside [0, {}]",
            spec.t_f
        )));
    }
    let dir = spec.direction();
    let a = dir * spec.a;
    let v = dir * spec.v_m;
    let out = if t < spec.t_b {
        (spec.q_0 + 0.5 * a * t * t, a * t, a)
    } else if t < spec.t_f - spec.t_b {
        (spec.q_0 - 0.5 * a * spec.t_b * spec.t_b + v * t, v, 0.0)
    } else {
        let r = spec.t_f - t;
        (spec.q_f - 0.5 * a * r * r, a * r, -a)
    };
    Ok(out)
}

/// Evaluate a minimum-time profile at time t.
pub fn mintime_eval(spec: &MinTimeSpec, t: f64) -> Result<(f64, f64, f64)> {
    if t < 0.0 || t > spec.t_f {
        return Err(CraneError::OutOfRange(format!(
            "t = {t} outside [0, {}]",
            spec.t_f
        )));
    }
    let dir = spec.direction();
    let a = dir * spec.a;
    let out = if t < spec.t_f / 2.0 {
        (spec.q_0 + 0.5 * a * t * t, a * t, a)
    } else {
        let r = spec.t_f - t;
        (spec.q_f - 0.5 * a * r * r, a * r, -a)
    };
    Ok(out)
}

/// One validation finding; `validate_spec` returns all of them instead of
/// failing on the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecViolation {
    pub what: String,
}

/// Check the LSPB identities (v_m = a t_b, dq = v_m (t_f - t_b), t_f > 2 t_b),
/// the velocity/acceleration limits and sample-time divisibility of the
/// zone times.
pub fn validate_spec(spec: &LspbSpec, v_max: f64, a_max: f64, t_s: f64) -> Vec<SpecViolation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            out.push(SpecViolation { what });
        }
    };
    check(
        (spec.v_m - spec.a * spec.t_b).abs() <= 1e-9,
        format!("v_m = a*t_b violated: {} vs {}", spec.v_m, spec.a * spec.t_b),
    );
    let dq = (spec.q_f - spec.q_0).abs();
    check(
        (dq - spec.v_m * (spec.t_f - spec.t_b)).abs() <= 1e-9,
        format!(
            "|q_f - q_0| = v_m*(t_f - t_b) violated: {} vs {}",
            dq,
            spec.v_m * (spec.t_f - spec.t_b)
        ),
    );
    check(
        spec.t_f > 2.0 * spec.t_b,
        format!("t_f > 2*t_b violated: {} vs {}", spec.t_f, 2.0 * spec.t_b),
    );
    check(spec.v_m <= v_max + 1e-12, format!("v_m {} > v_max {v_max}", spec.v_m));
    check(spec.a <= a_max + 1e-12, format!("a {} > a_max {a_max}", spec.a));
    for (name, t) in [("t_b", spec.t_b), ("t_f", spec.t_f)] {
        let steps = t / t_s;
        check(
            (steps - steps.round()).abs() <= 1e-9,
            format!("{name} = {t} not an integer multiple of t_s = {t_s}"),
        );
    }
    out
}

/// Check a minimum-time spec for internal consistency (the identity
/// |q_f - q_0| = a t_f^2 / 4) and limits.
pub fn validate_mintime(spec: &MinTimeSpec, v_max: f64, a_max: f64, t_s: f64) -> Vec<SpecViolation> {
    let mut out = Vec::new();
    let dq = (spec.q_f - spec.q_0).abs();
    let implied = spec.a * spec.t_f * spec.t_f / 4.0;
    if (dq - implied).abs() > 1e-9 {
        out.push(SpecViolation {
            what: format!("|q_f - q_0| = a*t_f^2/4 violated: {dq} vs {implied}"),
        });
    }
    if spec.v_peak() > v_max + 1e-12 {
        out.push(SpecViolation {
            what: format!("peak velocity {} > v_max {v_max}", spec.v_peak()),
        });
    }
    if spec.a > a_max + 1e-12 {
        out.push(SpecViolation {
            what: format!("a {} > a_max {a_max}", spec.a),
        });
    }
    let steps = spec.t_f / t_s;
    if (steps - steps.round()).abs() > 1e-9 {
        out.push(SpecViolation {
            what: format!("t_f = {} not an integer multiple of t_s = {t_s}", spec.t_f),
        });
    }
    out
}

/// Which zone of the transition the reference is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    Accel,
    ConstVel,
    Decel,
    Done,
}

/// Reference model state: per-axis positions and velocities plus the
/// command accelerations that produced the last step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub x_ref: f64,
    pub v_xref: f64,
    pub y_ref: f64,
    pub v_yref: f64,
    pub l_ref: f64,
    pub v_lref: f64,
    pub u_c: [f64; 3],
    pub zone: Zone,
}

impl ReferenceState {
    pub fn at_rest(x: f64, y: f64, l: f64) -> Self {
        ReferenceState {
            x_ref: x,
            v_xref: 0.0,
            y_ref: y,
            v_yref: 0.0,
            l_ref: l,
            v_lref: 0.0,
            u_c: [0.0; 3],
            zone: Zone::Accel,
        }
    }

    pub fn positions(&self) -> [f64; 3] {
        [self.x_ref, self.y_ref, self.l_ref]
    }

    pub fn as_state_vector(&self) -> [f64; 6] {
        [
            self.x_ref, self.v_xref, self.y_ref, self.v_yref, self.l_ref, self.v_lref,
        ]
    }
}

/// One discrete reference-model step: per axis, pos += T_s*vel (old vel),
/// vel += T_s*u_c. In the acceleration and constant-velocity zones the
/// commanded accelerations and resulting velocities are clamped to their
/// maxima; the deceleration zone runs unclamped because replanning already
/// guarantees its bounds.
pub fn reference_model_step(
    x_rm: &ReferenceState,
    u_c: [f64; 3],
    t_s: f64,
    v_max: f64,
    a_max: f64,
) -> ReferenceState {
    let clamp_zone = matches!(x_rm.zone, Zone::Accel | Zone::ConstVel);
    let mut u = u_c;
    if clamp_zone {
        for ui in u.iter_mut() {
            *ui = ui.clamp(-a_max, a_max);
        }
    }
    let mut next = *x_rm;
    next.x_ref += t_s * x_rm.v_xref;
    next.y_ref += t_s * x_rm.v_yref;
    next.l_ref += t_s * x_rm.v_lref;
    next.v_xref += t_s * u[0];
    next.v_yref += t_s * u[1];
    next.v_lref += t_s * u[2];
    if clamp_zone {
        next.v_xref = next.v_xref.clamp(-v_max, v_max);
        next.v_yref = next.v_yref.clamp(-v_max, v_max);
        next.v_lref = next.v_lref.clamp(-v_max, v_max);
    }
    next.u_c = u;
    next
}

/// Outcome of deceleration-zone replanning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplanResult {
    /// Correction velocities for (x, y) at deceleration entry, signed.
    pub v_rc: [f64; 2],
    /// Correction deceleration magnitudes applied against v_rc.
    pub a_rc: [f64; 2],
    /// Final deceleration time (>= the original t_b).
    pub t_b_new: f64,
    /// True when the deceleration window was extended and the hoisting-down
    /// profile must be rescaled to it.
    pub hoist_update: bool,
    pub iterations: usize,
}

/// Replan the deceleration zone at its entry.
///
/// `q_rd` are the (x, y) reference positions at deceleration entry, `q_rf`
/// the original endpoints, `v_r` the original cruise speed magnitudes and
/// `t_b` the original deceleration time. Velocity check first: correction
/// velocities above v_max extend the window to the largest
/// 2|q_rf - q_rd|/v_max. Acceleration check second: corrections above a_max
/// reset the velocities to the original cruise speeds and extend the window
/// accordingly, after which the accelerations are within bounds by the LSPB
/// identities. Always terminates, well inside the 15-cycle budget.
pub fn replan_deceleration(
    q_rd: [f64; 2],
    q_rf: [f64; 2],
    v_r: [f64; 2],
    t_b: f64,
    v_max: f64,
    a_max: f64,
) -> ReplanResult {
    let delta = [q_rf[0] - q_rd[0], q_rf[1] - q_rd[1]];
    let mut iterations = 0;
    let mut t_b_new = t_b;
    let mut hoist_update = false;

    // Step 1: correction velocities over the original window.
    iterations += 1;
    let mut v_rc = [2.0 * delta[0] / t_b_new, 2.0 * delta[1] / t_b_new];
    if v_rc[0].abs() > v_max || v_rc[1].abs() > v_max {
        iterations += 1;
        let t_ext = (2.0 * delta[0].abs() / v_max).max(2.0 * delta[1].abs() / v_max);
        t_b_new = t_ext.max(t_b);
        v_rc = [2.0 * delta[0] / t_b_new, 2.0 * delta[1] / t_b_new];
        hoist_update = true;
    }

    // Step 2: correction accelerations; on violation, fall back to the
    // original cruise speeds and stretch the window.
    iterations += 1;
    let mut a_rc = [v_rc[0].abs() / t_b_new, v_rc[1].abs() / t_b_new];
    if a_rc[0] > a_max || a_rc[1] > a_max {
        iterations += 1;
        let t_ext = (2.0 * delta[0].abs() / v_r[0]).max(2.0 * delta[1].abs() / v_r[1]);
        t_b_new = t_ext.max(t_b_new).max(t_b);
        v_rc = [2.0 * delta[0] / t_b_new, 2.0 * delta[1] / t_b_new];
        a_rc = [v_rc[0].abs() / t_b_new, v_rc[1].abs() / t_b_new];
        hoist_update = true;
    }

    ReplanResult {
        v_rc,
        a_rc,
        t_b_new,
        hoist_update,
        iterations,
    }
}
