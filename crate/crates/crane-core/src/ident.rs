//! Per-axis parameter identification.
//!
//! Each axis is excited on its own (other axes stationary, no load for x/y,
//! known load for hoisting), velocities are recovered from positions by
//! backward difference, and a 4-parameter regression
//! `v(k) = a1 v(k-1) + a2 (v_a(k-1) + dc) + a3 sgn(v(k)) + a4` is fitted by
//! recursive least squares. The physical axis parameters are then recovered
//! by inverting the regression coefficient map.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::params::AxisKind;
use crate::plant::coulomb_friction;

/// One regression sample: measured velocity and its regressor vector
/// [v(k-1), v_a(k-1) (+ DC offset for hoisting), sgn(v(k)), 1].
#[derive(Debug, Clone, Copy)]
pub struct RegressorSample {
    pub y: f64,
    pub phi: Vector4<f64>,
}

/// Recursive least squares state: coefficient estimates and covariance.
#[derive(Debug, Clone)]
pub struct RlsState {
    pub theta: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub samples: usize,
}

impl RlsState {
    /// Standard flat start: zero estimates, P = p0 * I.
    pub fn new(p0: f64) -> Self {
        RlsState {
            theta: Vector4::zeros(),
            p: Matrix4::identity() * p0,
            samples: 0,
        }
    }
}

impl Default for RlsState {
    fn default() -> Self {
        RlsState::new(1e6)
    }
}

/// One RLS update with forgetting factor `lambda` (1 = no forgetting).
///
/// With lambda = 1 the correction gain denominator is 1 + phi' P phi and the
/// update is the textbook covariance recursion. P is re-symmetrized after
/// each step.
pub fn rls_update(state: &RlsState, sample: &RegressorSample, lambda: f64) -> Result<RlsState> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(CraneError::InvalidParameter(format!("lambda = {lambda}")));
    }
    let phi = sample.phi;
    let p_phi = state.p * phi;
    let denom = lambda + phi.dot(&p_phi);
    if denom <= 0.0 {
        return Err(CraneError::NumericalBreakdown(format!(
            "gain denominator {denom} <= 0"
        )));
    }
    let eps = sample.y - phi.dot(&state.theta);
    let gain = p_phi / denom;
    let theta = state.theta + gain * eps;
    let mut p = (state.p - p_phi * p_phi.transpose() / denom) / lambda;
    // symmetrize against floating-point drift
    p = (p + p.transpose()) * 0.5;
    Ok(RlsState {
        theta,
        p,
        samples: state.samples + 1,
    })
}

/// Number of consecutive samples the excitation holds each voltage level.
///
/// Holding the voltage across adjacent samples makes the backward-difference
/// velocity satisfy the single-lag sampled recursion exactly on those
/// samples, which is what lets the identification invert to the true
/// parameters; see `identify_axis`.
pub const EXCITATION_HOLD: usize = 5;

/// Deterministic multi-sine excitation voltage.
///
/// Sum of three sinusoids at incommensurate frequencies, sampled as a
/// staircase (each level held for `EXCITATION_HOLD` samples) and scaled so
/// the peak equals `amplitude`. The sequence is forced to spend at least 10%
/// of its samples below 20% amplitude so the friction nonlinearity is
/// exercised; if the raw multi-sine doesn't, a quiet startup window is
/// prepended.
pub fn generate_excitation(duration: f64, t_s: f64, amplitude: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let freqs = [0.1, 0.35, 0.9];
    let weights = [1.0, 0.8, 0.6];
    let phases: Vec<f64> = (0..3)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();

    let n = (duration / t_s).round() as usize;
    let mut v: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k - k % EXCITATION_HOLD) as f64 * t_s;
            freqs
                .iter()
                .zip(weights.iter())
                .zip(phases.iter())
                .map(|((f, w), ph)| w * (std::f64::consts::TAU * f * t + ph).sin())
                .sum::<f64>()
        })
        .collect();
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        for x in v.iter_mut() {
            *x *= amplitude / peak;
        }
    }
    let low = v.iter().filter(|x| x.abs() <= 0.2 * amplitude).count();
    let need = n.div_ceil(10);
    if low < need {
        for x in v.iter_mut().take(need - low) {
            *x = 0.0;
        }
    }
    v
}

/// Which discrete map the regression coefficients are inverted through.
///
/// `BackwardDifference` inverts the implicit-Euler regression map; it is
/// exact when the data itself follows that recursion. `ZeroOrderHold`
/// inverts the exact sampled map and is the right choice for data sampled
/// from the continuous plant, where the fitted a1 converges to exp(-B T/J).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Discretization {
    BackwardDifference,
    ZeroOrderHold,
}

/// Physical parameters recovered from regression coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentifiedAxis {
    pub j_e: f64,
    pub b_e: f64,
    /// Coulomb constant, positive direction.
    pub a_1: f64,
    /// Coulomb constant, negative direction.
    pub a_2: f64,
    /// Symmetric friction component (a_1 + a_2)/2.
    pub b_1f: f64,
    /// Asymmetric friction component (a_1 - a_2)/2.
    pub b_2f: f64,
}

/// Knowns needed to map regression coefficients back to physical parameters.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryKnowns {
    pub k_e: f64,
    pub t_s: f64,
    pub axis: AxisKind,
    /// Load mass (used only for the hoisting axis), kg.
    pub m: f64,
    pub r_g: f64,
    pub r_p: f64,
    pub g: f64,
}

/// Invert the regression coefficient map to physical axis parameters.
///
/// B_e and the friction constants use the same formulas under either map;
/// only the inertia recovery differs between the two discretizations. For
/// the hoisting axis the reflected load inertia r_g R_p m is subtracted.
pub fn recover_parameters(
    alpha: &Vector4<f64>,
    knowns: &RecoveryKnowns,
    disc: Discretization,
) -> Result<IdentifiedAxis> {
    let (a1, a2, a3, a4) = (alpha[0], alpha[1], alpha[2], alpha[3]);
    if !(a1 > 0.0 && a1 < 1.0) {
        return Err(CraneError::OutOfRange(format!("alpha_1 = {a1} not in (0,1)")));
    }
    if !(a2 > 0.0) {
        return Err(CraneError::OutOfRange(format!("alpha_2 = {a2} <= 0")));
    }
    let k_e = knowns.k_e;
    let t_s = knowns.t_s;
    let b_e = k_e * (1.0 - a1) / a2;
    let j_lumped = match disc {
        Discretization::BackwardDifference => k_e * t_s * a1 / a2,
        // a1 = exp(-B T/J)  =>  J = -B T / ln a1
        Discretization::ZeroOrderHold => -b_e * t_s / a1.ln(),
    };
    let j_e = match knowns.axis {
        AxisKind::Hoisting => j_lumped - knowns.r_g * knowns.r_p * knowns.m,
        _ => j_lumped,
    };
    let b_1f = -k_e * a3 / a2;
    let b_2f = -k_e * a4 / a2;
    Ok(IdentifiedAxis {
        j_e,
        b_e,
        a_1: b_1f + b_2f,
        a_2: b_1f - b_2f,
        b_1f,
        b_2f,
    })
}

/// Identification options.
#[derive(Debug, Clone, Copy)]
pub struct IdentOptions {
    pub lambda: f64,
    pub p0: f64,
    /// Velocity deadband for the sign regressor; keep equal to the plant's
    /// friction deadband so regressor and truth agree near zero velocity.
    pub deadband: f64,
    /// Regression samples whose velocities are below this magnitude are
    /// skipped: the friction torque may have changed sign mid-interval
    /// there, which breaks the constant-friction sample model. Must exceed
    /// half the largest per-sample velocity change for the skip to catch
    /// every crossing.
    pub sign_margin: f64,
    pub disc: Discretization,
    /// Moving-average window on backward-difference velocities (1 = off).
    pub prefilter: usize,
}

impl Default for IdentOptions {
    fn default() -> Self {
        IdentOptions {
            lambda: 1.0,
            p0: 1e6,
            deadband: 1e-4,
            sign_margin: 0.01,
            disc: Discretization::ZeroOrderHold,
            prefilter: 1,
        }
    }
}

/// Result of a full single-axis identification pass.
#[derive(Debug, Clone)]
pub struct IdentTrace {
    pub axis: IdentifiedAxis,
    pub alpha: Vector4<f64>,
    /// Per-step recovered (J_e, B_e, a_1, a_2) once the coefficients are in
    /// range; NaN rows before that.
    pub trace: Vec<[f64; 4]>,
    /// Backward-difference velocities used in the regression.
    pub velocities: Vec<f64>,
}

/// Run RLS identification on recorded (voltage, position) data of one axis.
///
/// Velocities come from backward differences of the position channel; the
/// first usable regression sample is at k = 2.
///
/// The backward-difference velocity is the mean velocity over a sample
/// interval, so it obeys the single-lag sampled recursion exactly only when
/// the voltage was constant over the two preceding intervals and the
/// friction torque did not change sign. Samples violating either condition
/// are skipped; with a staircase excitation this leaves most of the record
/// and removes the structural bias a plain pass would have.
pub fn identify_axis(
    voltages: &[f64],
    positions: &[f64],
    knowns: &RecoveryKnowns,
    opts: &IdentOptions,
) -> Result<IdentTrace> {
    let n = voltages.len().min(positions.len());
    if n < 100 {
        return Err(CraneError::InsufficientData { needed: 100, got: n });
    }
    let mut vel = vec![0.0; n];
    for k in 1..n {
        vel[k] = (positions[k] - positions[k - 1]) / knowns.t_s;
    }
    if opts.prefilter > 1 {
        let w = opts.prefilter;
        let raw = vel.clone();
        for k in 0..n {
            let lo = k.saturating_sub(w - 1);
            let count = (k - lo + 1) as f64;
            vel[k] = raw[lo..=k].iter().sum::<f64>() / count;
        }
    }

    let dc = match knowns.axis {
        AxisKind::Hoisting => knowns.r_g * knowns.r_p * knowns.m * knowns.g / knowns.k_e,
        _ => 0.0,
    };

    let sign_of = |v: f64| {
        if v > opts.deadband {
            1.0
        } else if v < -opts.deadband {
            -1.0
        } else {
            0.0
        }
    };

    let mut state = RlsState::new(opts.p0);
    let mut trace = Vec::with_capacity(n);
    for k in 2..n {
        let sgn = sign_of(vel[k]);
        let held_input = voltages[k - 1] == voltages[k - 2];
        let steady_sign = sgn == sign_of(vel[k - 1])
            && vel[k].abs() > opts.sign_margin
            && vel[k - 1].abs() > opts.sign_margin;
        if held_input && steady_sign {
            let sample = RegressorSample {
                y: vel[k],
                phi: Vector4::new(vel[k - 1], voltages[k - 1] + dc, sgn, 1.0),
            };
            state = rls_update(&state, &sample, opts.lambda)?;
        }
        match recover_parameters(&state.theta, knowns, opts.disc) {
            Ok(ax) => trace.push([ax.j_e, ax.b_e, ax.a_1, ax.a_2]),
            Err(_) => trace.push([f64::NAN; 4]),
        }
    }
    if state.samples < 100 {
        return Err(CraneError::InsufficientData {
            needed: 100,
            got: state.samples,
        });
    }
    let axis = recover_parameters(&state.theta, knowns, opts.disc)?;
    Ok(IdentTrace {
        axis,
        alpha: state.theta,
        trace,
        velocities: vel,
    })
}

/// Position and velocity mean-square errors of an identified model replayed
/// against recorded data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValidationMse {
    pub position: f64,
    pub velocity: f64,
}

/// Simulate the identified scalar axis under the recorded voltages and
/// compare with the recorded response.
///
/// The identified model is run in its own regression form (the fitted
/// recursion), with the sign regressor evaluated on the model's previous
/// velocity; positions are rebuilt by the same backward-difference
/// convention, x(k) = x(k-1) + T_s v(k).
pub fn validate_model(
    identified: &IdentifiedAxis,
    voltages: &[f64],
    positions: &[f64],
    knowns: &RecoveryKnowns,
    opts: &IdentOptions,
) -> ValidationMse {
    let n = voltages.len().min(positions.len());
    let t_s = knowns.t_s;
    let dc = match knowns.axis {
        AxisKind::Hoisting => knowns.r_g * knowns.r_p * knowns.m * knowns.g / knowns.k_e,
        _ => 0.0,
    };
    let j_lumped = match knowns.axis {
        AxisKind::Hoisting => identified.j_e + knowns.r_g * knowns.r_p * knowns.m,
        _ => identified.j_e,
    };
    let (a1, b1, bd1) = match opts.disc {
        Discretization::BackwardDifference => {
            let den = j_lumped + t_s * identified.b_e;
            (j_lumped / den, knowns.k_e * t_s / den, t_s / den)
        }
        Discretization::ZeroOrderHold => {
            let a1 = (-identified.b_e * t_s / j_lumped).exp();
            (
                a1,
                knowns.k_e / identified.b_e * (1.0 - a1),
                (1.0 - a1) / identified.b_e,
            )
        }
    };

    let mut vel_hat = 0.0;
    let mut pos_hat = positions.first().copied().unwrap_or(0.0);
    let mut se_v = 0.0;
    let mut se_p = 0.0;
    let mut prev_pos = pos_hat;
    for k in 1..n {
        let f_cf = coulomb_friction(vel_hat, identified.a_1, identified.a_2, opts.deadband);
        vel_hat = a1 * vel_hat + b1 * (voltages[k - 1] + dc) - bd1 * f_cf;
        pos_hat += t_s * vel_hat;
        let vel_meas = (positions[k] - prev_pos) / t_s;
        prev_pos = positions[k];
        se_v += (vel_hat - vel_meas) * (vel_hat - vel_meas);
        se_p += (pos_hat - positions[k]) * (pos_hat - positions[k]);
    }
    let cnt = (n - 1) as f64;
    ValidationMse {
        position: se_p / cnt,
        velocity: se_v / cnt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CraneParameters;
    use crate::plant::{step, CraneState, PlantConfig, PlantInput};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn knowns(axis: AxisKind, m: f64) -> RecoveryKnowns {
        let p = CraneParameters::desk_rig(m);
        let a = p.axis(axis);
        RecoveryKnowns {
            k_e: a.k_e,
            t_s: 0.01,
            axis,
            m,
            r_g: a.r_g,
            r_p: a.r_p,
            g: p.g,
        }
    }

    #[test]
    fn excitation_bounds_and_determinism() {
        let v1 = generate_excitation(20.0, 0.01, 10.0, 7);
        let v2 = generate_excitation(20.0, 0.01, 10.0, 7);
        assert_eq!(v1.len(), 2000);
        assert_eq!(v1, v2);
        assert!(v1.iter().all(|x| x.abs() <= 10.0 + 1e-12));
        let low = v1.iter().filter(|x| x.abs() <= 2.0).count();
        assert!(low * 10 >= v1.len(), "low-amplitude dwell {low}/2000");
        let v3 = generate_excitation(20.0, 0.01, 10.0, 8);
        assert_ne!(v1, v3);
    }

    #[test]
    fn rls_zero_innovation_keeps_estimate() {
        let mut st = RlsState::default();
        st.theta = Vector4::new(0.5, 0.1, -0.2, 0.05);
        let phi = Vector4::new(1.0, 2.0, -1.0, 1.0);
        let sample = RegressorSample {
            y: phi.dot(&st.theta),
            phi,
        };
        let next = rls_update(&st, &sample, 1.0).unwrap();
        assert_eq!(next.theta, st.theta);
    }

    #[test]
    fn rls_matches_batch_least_squares() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let truth = Vector4::new(0.9, 0.002, -0.02, 0.001);
        let mut st = RlsState::new(1e6);
        let mut ata = Matrix4::<f64>::zeros();
        let mut aty = Vector4::<f64>::zeros();
        for _ in 0..500 {
            let phi = Vector4::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-10.0..10.0),
                if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                1.0,
            );
            let y = phi.dot(&truth) + rng.gen_range(-1e-3..1e-3);
            ata += phi * phi.transpose();
            aty += phi * y;
            st = rls_update(&st, &RegressorSample { y, phi }, 1.0).unwrap();
        }
        let batch = ata.lu().solve(&aty).unwrap();
        for i in 0..4 {
            assert_relative_eq!(st.theta[i], batch[i], max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn rls_converges_on_noiseless_synthetic_data() {
        let truth = Vector4::new(0.88, 1.7e-3, -2.7e-3, -1.6e-4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut st = RlsState::default();
        let mut v = 0.0;
        for _ in 0..2000 {
            let u = rng.gen_range(-10.0..10.0);
            let sgn = if v > 0.0 { 1.0 } else { -1.0 };
            let phi = Vector4::new(v, u, sgn, 1.0);
            let y = phi.dot(&truth);
            st = rls_update(&st, &RegressorSample { y, phi }, 1.0).unwrap();
            v = y;
        }
        for i in 0..4 {
            assert!((st.theta[i] - truth[i]).abs() <= 1e-4);
        }
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut st = RlsState::default();
        for k in 0..10_000 {
            let phi = Vector4::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-10.0..10.0),
                (k % 3) as f64 - 1.0,
                1.0,
            );
            let y = rng.gen_range(-1.0..1.0);
            st = rls_update(&st, &RegressorSample { y, phi }, 1.0).unwrap();
        }
        assert_eq!(st.p, st.p.transpose());
        let eig = st.p.symmetric_eigenvalues();
        assert!(eig.min() > 0.0, "min eigenvalue {}", eig.min());
    }

    #[test]
    fn recovery_inverts_backward_difference_map() {
        // forward map of the traveling axis through (4.5-14), then invert
        let (j, b, k, t_s) = (75e-4, 96.3e-3, 14e-4, 0.01);
        let den = j + t_s * b;
        let alpha = Vector4::new(j / den, k * t_s / den, 0.0, 0.0);
        assert_relative_eq!(alpha[0], 0.8862, max_relative = 1e-4);
        assert_relative_eq!(alpha[1], 1.654e-3, max_relative = 1e-3);
        let rec = recover_parameters(
            &alpha,
            &knowns(AxisKind::Traveling, 0.0),
            Discretization::BackwardDifference,
        )
        .unwrap();
        assert_relative_eq!(rec.j_e, j, max_relative = 1e-12);
        assert_relative_eq!(rec.b_e, b, max_relative = 1e-12);
    }

    #[test]
    fn friction_split_round_trip() {
        // b_1 = (a1 + a2)/2, b_2 = (a1 - a2)/2 and back
        let (b1f, b2f) = ((23e-4 + 21e-4) / 2.0, (23e-4 - 21e-4) / 2.0);
        assert_relative_eq!(b1f, 22e-4, max_relative = 1e-12);
        assert_relative_eq!(b2f, 1e-4, max_relative = 1e-9);
        let (j, b, k, t_s) = (75e-4, 96.3e-3, 14e-4, 0.01);
        let den = j + t_s * b;
        let alpha = Vector4::new(j / den, k * t_s / den, -b1f * t_s / den, -b2f * t_s / den);
        let rec = recover_parameters(
            &alpha,
            &knowns(AxisKind::Traveling, 0.0),
            Discretization::BackwardDifference,
        )
        .unwrap();
        assert_relative_eq!(rec.a_1, 23e-4, max_relative = 1e-12);
        assert_relative_eq!(rec.a_2, 21e-4, max_relative = 1e-12);
    }

    #[test]
    fn zero_friction_coefficients_recover_zero() {
        let alpha = Vector4::new(0.88, 1.7e-3, 0.0, 0.0);
        let rec = recover_parameters(
            &alpha,
            &knowns(AxisKind::Traveling, 0.0),
            Discretization::ZeroOrderHold,
        )
        .unwrap();
        assert_eq!(rec.a_1, 0.0);
        assert_eq!(rec.a_2, 0.0);
    }

    #[test]
    fn recovery_rejects_out_of_range() {
        let k = knowns(AxisKind::Traveling, 0.0);
        assert!(recover_parameters(
            &Vector4::new(1.2, 1e-3, 0.0, 0.0),
            &k,
            Discretization::BackwardDifference
        )
        .is_err());
        assert!(recover_parameters(
            &Vector4::new(0.9, -1e-3, 0.0, 0.0),
            &k,
            Discretization::BackwardDifference
        )
        .is_err());
    }

    /// Simulate a single-axis run on the nonlinear plant and return
    /// (voltages, positions) for that axis.
    fn simulate_axis_run(axis: AxisKind, m: f64, duration: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let p = CraneParameters::desk_rig(m);
        let cfg = PlantConfig::default();
        let t_s = 0.01;
        let volts = generate_excitation(duration, t_s, 10.0, seed);
        // start mid-workspace; hoisting starts at l = 0.3 m
        let mut s = CraneState::at_rest(0.3, 0.3, 0.3);
        let mut pos = Vec::with_capacity(volts.len());
        for v in &volts {
            pos.push(match axis {
                AxisKind::Traveling => s.x,
                AxisKind::Traversing => s.y,
                AxisKind::Hoisting => s.l,
            });
            let u = match axis {
                AxisKind::Traveling => PlantInput::new(*v, 0.0, 0.0),
                AxisKind::Traversing => PlantInput::new(0.0, *v, 0.0),
                AxisKind::Hoisting => PlantInput::new(0.0, 0.0, *v),
            };
            s = step(&s, &u, &p, &cfg, t_s, 10).unwrap();
        }
        (volts, pos)
    }

    #[test]
    fn traveling_round_trip_within_one_percent() {
        let (volts, pos) = simulate_axis_run(AxisKind::Traveling, 0.0, 20.0, 42);
        let k = knowns(AxisKind::Traveling, 0.0);
        let out = identify_axis(&volts, &pos, &k, &IdentOptions::default()).unwrap();
        let truth = CraneParameters::desk_rig(0.0).x;
        assert_relative_eq!(out.axis.j_e, truth.j_e, max_relative = 0.01);
        assert_relative_eq!(out.axis.b_e, truth.b_e, max_relative = 0.01);
        assert_relative_eq!(out.axis.a_1, truth.a_1, max_relative = 0.01);
        assert_relative_eq!(out.axis.a_2, truth.a_2, max_relative = 0.01);
    }

    #[test]
    fn hoisting_round_trip_with_known_load() {
        let (volts, pos) = simulate_axis_run(AxisKind::Hoisting, 0.4, 20.0, 43);
        let k = knowns(AxisKind::Hoisting, 0.4);
        let out = identify_axis(&volts, &pos, &k, &IdentOptions::default()).unwrap();
        let truth = CraneParameters::desk_rig(0.4).l;
        assert_relative_eq!(out.axis.j_e, truth.j_e, max_relative = 0.01);
        assert_relative_eq!(out.axis.b_e, truth.b_e, max_relative = 0.01);
    }

    #[test]
    fn constant_zero_voltage_fails_cleanly() {
        let volts = vec![0.0; 2000];
        let pos = vec![0.3; 2000];
        let k = knowns(AxisKind::Traveling, 0.0);
        assert!(identify_axis(&volts, &pos, &k, &IdentOptions::default()).is_err());
    }

    #[test]
    fn insufficient_data_rejected() {
        let k = knowns(AxisKind::Traveling, 0.0);
        let r = identify_axis(&vec![1.0; 50], &vec![0.0; 50], &k, &IdentOptions::default());
        assert!(matches!(r, Err(CraneError::InsufficientData { .. })));
    }

    #[test]
    fn regressor_conditioning_is_bounded() {
        let (volts, pos) = simulate_axis_run(AxisKind::Traveling, 0.0, 20.0, 44);
        let k = knowns(AxisKind::Traveling, 0.0);
        let out = identify_axis(&volts, &pos, &k, &IdentOptions::default()).unwrap();
        let n = out.velocities.len();
        let mut rows = Vec::new();
        for kk in 2..n {
            let v = out.velocities[kk];
            let sgn = if v > 1e-4 {
                1.0
            } else if v < -1e-4 {
                -1.0
            } else {
                0.0
            };
            rows.extend_from_slice(&[out.velocities[kk - 1], volts[kk - 1], sgn, 1.0]);
        }
        let a = nalgebra::DMatrix::from_row_slice(n - 2, 4, &rows);
        let svd = a.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        assert!(smax / smin < 1e6, "cond = {}", smax / smin);
    }

    #[test]
    fn validation_mse_small_on_identified_model() {
        let (volts, pos) = simulate_axis_run(AxisKind::Traveling, 0.0, 20.0, 45);
        let k = knowns(AxisKind::Traveling, 0.0);
        let opts = IdentOptions::default();
        let out = identify_axis(&volts, &pos, &k, &opts).unwrap();
        let mse = validate_model(&out.axis, &volts, &pos, &k, &opts);
        assert!(mse.velocity <= 1e-4, "velocity MSE {}", mse.velocity);
    }

    #[test]
    fn validation_exact_on_self_generated_data() {
        // data generated by the identified recursion itself reproduces exactly
        let k = knowns(AxisKind::Traveling, 0.0);
        let truth = CraneParameters::desk_rig(0.0).x;
        let ident = IdentifiedAxis {
            j_e: truth.j_e,
            b_e: truth.b_e,
            a_1: truth.a_1,
            a_2: truth.a_2,
            b_1f: (truth.a_1 + truth.a_2) / 2.0,
            b_2f: (truth.a_1 - truth.a_2) / 2.0,
        };
        let opts = IdentOptions::default();
        let volts = generate_excitation(20.0, 0.01, 10.0, 46);
        // replay the same recursion validate_model uses
        let a1 = (-truth.b_e * 0.01 / truth.j_e).exp();
        let b1 = truth.k_e / truth.b_e * (1.0 - a1);
        let bd1 = (1.0 - a1) / truth.b_e;
        let mut v = 0.0;
        let mut x = 0.3;
        let mut pos = vec![x];
        for u in volts.iter().take(volts.len() - 1) {
            let f = coulomb_friction(v, truth.a_1, truth.a_2, opts.deadband);
            v = a1 * v + b1 * u - bd1 * f;
            x += 0.01 * v;
            pos.push(x);
        }
        let mse = validate_model(&ident, &volts, &pos, &k, &opts);
        assert!(mse.velocity <= 1e-18, "velocity MSE {}", mse.velocity);
        assert!(mse.position <= 1e-18, "position MSE {}", mse.position);
    }

    #[test]
    fn perturbing_inertia_increases_velocity_mse() {
        let (volts, pos) = simulate_axis_run(AxisKind::Traveling, 0.0, 20.0, 47);
        let k = knowns(AxisKind::Traveling, 0.0);
        let opts = IdentOptions::default();
        let out = identify_axis(&volts, &pos, &k, &opts).unwrap();
        let base = validate_model(&out.axis, &volts, &pos, &k, &opts);
        let mut worse = out.axis;
        worse.j_e *= 1.2;
        let perturbed = validate_model(&worse, &volts, &pos, &k, &opts);
        assert!(perturbed.velocity > base.velocity);
    }

    proptest! {
        /// Recovery inverts the forward maps exactly (to fp) over random
        /// admissible parameters, for both discretizations.
        #[test]
        fn recovery_inverts_forward_maps(
            j in 1e-3f64..5e-2,
            b in 1e-2f64..1.0,
            a1f in 0.0f64..5e-3,
            a2f in 0.0f64..5e-3,
        ) {
            let t_s = 0.01;
            let k_e = 14e-4;
            let kn = knowns(AxisKind::Traveling, 0.0);
            let b1f = (a1f + a2f) / 2.0;
            let b2f = (a1f - a2f) / 2.0;

            // backward-difference forward map
            let den = j + t_s * b;
            let alpha = Vector4::new(j / den, k_e * t_s / den, -b1f * t_s / den, -b2f * t_s / den);
            let rec = recover_parameters(&alpha, &kn, Discretization::BackwardDifference).unwrap();
            prop_assert!((rec.j_e - j).abs() <= 1e-10 * j);
            prop_assert!((rec.b_e - b).abs() <= 1e-10 * b);
            prop_assert!((rec.a_1 - a1f).abs() <= 1e-10 * a1f.max(1e-12));
            prop_assert!((rec.a_2 - a2f).abs() <= 1e-10 * a2f.max(1e-12));

            // ZOH forward map
            let az = (-b * t_s / j).exp();
            let bz = k_e / b * (1.0 - az);
            let bdz = (1.0 - az) / b;
            let alpha = Vector4::new(az, bz, -bdz * b1f, -bdz * b2f);
            let rec = recover_parameters(&alpha, &kn, Discretization::ZeroOrderHold).unwrap();
            prop_assert!((rec.j_e - j).abs() <= 1e-10 * j);
            prop_assert!((rec.b_e - b).abs() <= 1e-10 * b);
            prop_assert!((rec.a_1 - a1f).abs() <= 1e-10 * a1f.max(1e-12));
        }
    }
}
