//! Passivity-based load swing control and the discrete high-gain swing
//! observer.
//!
//! The swing dynamics are driven by the trolley accelerations; adding a
//! correction term proportional to the estimated swing rates to the
//! reference accelerations makes the swing subsystem output strictly
//! passive, hence finite-gain L2 stable, provided the gains dominate the
//! destabilizing hoisting coupling: k_theta >= 1.5 |l_dot|_max.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};

/// Swing angles and rates as estimated by the observer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SwingEstimate {
    pub theta_x: f64,
    pub theta_x_dot: f64,
    pub theta_y: f64,
    pub theta_y_dot: f64,
}

/// Swing damping configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SwingControlConfig {
    /// Diagonal gain (k_theta_x, k_theta_y), 1/s.
    pub k_theta: (f64, f64),
    /// Maximum hoisting speed magnitude the gains must dominate, m/s.
    pub v_l_max: f64,
    pub enabled: bool,
}

impl SwingControlConfig {
    /// Gains from the desk-rig tuning: k = 0.17 against v_l_max = 0.1.
    pub fn desk_rig() -> Self {
        SwingControlConfig {
            k_theta: (17e-2, 17e-2),
            v_l_max: 10e-2,
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        SwingControlConfig {
            enabled: false,
            ..Self::desk_rig()
        }
    }

    /// Passivity condition: each gain at least 1.5 times the maximum
    /// hoisting speed.
    pub fn gains_valid(&self) -> bool {
        !self.enabled
            || (self.k_theta.0 >= 1.5 * self.v_l_max && self.k_theta.1 >= 1.5 * self.v_l_max)
    }
}

/// Geometry matrix H_theta coupling trolley accelerations into the swing
/// dynamics; invertible while both angles are away from +/- pi/2.
pub fn h_theta(theta_x: f64, theta_y: f64) -> Matrix2<f64> {
    let (sx, cx) = theta_x.sin_cos();
    let (sy, cy) = theta_y.sin_cos();
    Matrix2::new(cx * cy, 0.0, -sx * sy, cy)
}

/// Swing-damping acceleration correction:
/// u_c = a_ref + K_theta * H_theta^-1 * theta_dot.
///
/// Returns `a_ref` unchanged when disabled. Errors when det(H_theta) =
/// cos(theta_x) cos^2(theta_y) falls below 1e-3.
pub fn swing_correction(
    est: &SwingEstimate,
    a_ref: (f64, f64),
    cfg: &SwingControlConfig,
) -> Result<(f64, f64)> {
    if !cfg.enabled {
        return Ok(a_ref);
    }
    let (sx, cx) = est.theta_x.sin_cos();
    let (sy, cy) = est.theta_y.sin_cos();
    let det = cx * cy * cy;
    if det < 1e-3 {
        return Err(CraneError::NearSingularH(det));
    }
    // H^-1 = (1/det) [[cy, 0], [sx*sy, cx*cy]]
    let hinv = Matrix2::new(cy, 0.0, sx * sy, cx * cy) / det;
    let rate = Vector2::new(est.theta_x_dot, est.theta_y_dot);
    let corr = hinv * rate;
    Ok((
        a_ref.0 + cfg.k_theta.0 * corr[0],
        a_ref.1 + cfg.k_theta.1 * corr[1],
    ))
}

/// Planar variant: u_cx = a_xref + k * theta_dot / cos(theta).
pub fn swing_correction_2d(est: &SwingEstimate, a_xref: f64, cfg: &SwingControlConfig) -> Result<f64> {
    if !cfg.enabled {
        return Ok(a_xref);
    }
    let cx = est.theta_x.cos();
    if cx < 1e-3 {
        return Err(CraneError::NearSingularH(cx));
    }
    Ok(a_xref + cfg.k_theta.0 * est.theta_x_dot / cx)
}

/// Storage function of the swing subsystem (per unit load mass):
/// V = 1/2 theta_dot' diag(l cos^2(theta_y), l) theta_dot
///     + g (1 - cos(theta_x) cos(theta_y)).
///
/// Along the swing dynamics V_dot = -1.5 l_dot (cos^2(theta_y) thx_dot^2 +
/// thy_dot^2) - theta_dot' H_theta a_xy, so V is non-increasing when the
/// trolley coasts and the load is hoisted down. Diagnostics only.
pub fn storage_energy(theta: (f64, f64), theta_dot: (f64, f64), l: f64, g: f64) -> f64 {
    let cy = theta.1.cos();
    0.5 * l * (cy * cy * theta_dot.0 * theta_dot.0 + theta_dot.1 * theta_dot.1)
        + g * (1.0 - theta.0.cos() * theta.1.cos())
}

/// Per-angle observer gain pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObserverGain {
    pub l_1: f64,
    pub l_2: f64,
}

/// Discrete high-gain swing observer configuration. Each angle channel is a
/// double integrator A = [[1, T_s], [0, 1]] observed through the angle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SwingObserverConfig {
    pub gain_x: ObserverGain,
    pub gain_y: ObserverGain,
    pub t_s: f64,
}

impl SwingObserverConfig {
    /// Desk-rig gains L = [1, 25] for both angles.
    pub fn desk_rig(t_s: f64) -> Self {
        let g = ObserverGain { l_1: 1.0, l_2: 25.0 };
        SwingObserverConfig {
            gain_x: g,
            gain_y: g,
            t_s,
        }
    }

    /// High-gain construction: continuous error polynomial s^2 + d1 s + d2
    /// scaled by 1/eps and mapped through the forward-difference model,
    /// giving l_1 = d1 T_s / eps, l_2 = d2 T_s / eps^2. With eps = T_s,
    /// d1 = 1, d2 = 0.25 this reproduces the desk-rig gains.
    pub fn high_gain(eps: f64, d_1: f64, d_2: f64, t_s: f64) -> Result<Self> {
        if !(eps > 0.0 && d_1 > 0.0 && d_2 > 0.0) {
            return Err(CraneError::InvalidParameter(
                "high-gain observer constants must be positive".into(),
            ));
        }
        let g = ObserverGain {
            l_1: d_1 * t_s / eps,
            l_2: d_2 * t_s / (eps * eps),
        };
        let cfg = SwingObserverConfig {
            gain_x: g,
            gain_y: g,
            t_s,
        };
        if cfg.max_error_pole_radius() >= 1.0 {
            return Err(CraneError::InvalidParameter(format!(
                "observer error poles outside unit circle (radius {})",
                cfg.max_error_pole_radius()
            )));
        }
        Ok(cfg)
    }

    /// Error-dynamics eigenvalues of one channel: roots of
    /// z^2 + (l_1 - 2) z + (1 - l_1 + l_2 T_s).
    pub fn error_poles(&self, gain: &ObserverGain) -> (f64, f64, f64) {
        let b = gain.l_1 - 2.0;
        let c = 1.0 - gain.l_1 + gain.l_2 * self.t_s;
        let disc = b * b - 4.0 * c;
        if disc >= 0.0 {
            let r = disc.sqrt();
            ((-b + r) / 2.0, (-b - r) / 2.0, 0.0)
        } else {
            // complex pair: return (re, re, |im|)
            (-b / 2.0, -b / 2.0, (-disc).sqrt() / 2.0)
        }
    }

    pub fn max_error_pole_radius(&self) -> f64 {
        let mut radius = 0.0f64;
        for g in [&self.gain_x, &self.gain_y] {
            let (r1, r2, im) = self.error_poles(g);
            if im == 0.0 {
                radius = radius.max(r1.abs()).max(r2.abs());
            } else {
                radius = radius.max((r1 * r1 + im * im).sqrt());
            }
        }
        radius
    }
}

/// Swing observer state: per-angle estimates advanced by
/// x(k+1) = A x(k) + L (y(k) - C x(k)).
#[derive(Debug, Clone, Copy, Default)]
pub struct SwingObserver {
    pub estimate: SwingEstimate,
}

impl SwingObserver {
    pub fn new() -> Self {
        SwingObserver::default()
    }

    pub fn step(&mut self, cfg: &SwingObserverConfig, theta_x_meas: f64, theta_y_meas: f64) -> SwingEstimate {
        let e = &mut self.estimate;
        let t_s = cfg.t_s;
        let ex = theta_x_meas - e.theta_x;
        let ey = theta_y_meas - e.theta_y;
        let next = SwingEstimate {
            theta_x: e.theta_x + t_s * e.theta_x_dot + cfg.gain_x.l_1 * ex,
            theta_x_dot: e.theta_x_dot + cfg.gain_x.l_2 * ex,
            theta_y: e.theta_y + t_s * e.theta_y_dot + cfg.gain_y.l_1 * ey,
            theta_y_dot: e.theta_y_dot + cfg.gain_y.l_2 * ey,
        };
        *e = next;
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_rate_gives_no_correction() {
        let est = SwingEstimate {
            theta_x: 0.2,
            theta_y: -0.1,
            ..Default::default()
        };
        let out = swing_correction(&est, (1.5, -0.5), &SwingControlConfig::desk_rig()).unwrap();
        assert_eq!(out, (1.5, -0.5));
    }

    #[test]
    fn identity_geometry_at_zero_angles() {
        let est = SwingEstimate {
            theta_x_dot: 0.1,
            ..Default::default()
        };
        let cfg = SwingControlConfig::desk_rig();
        let out = swing_correction(&est, (1.0, 0.0), &cfg).unwrap();
        assert_relative_eq!(out.0, 1.0 + 0.17 * 0.1, max_relative = 1e-14);
        assert_eq!(out.1, 0.0);
    }

    #[test]
    fn disabled_passes_reference_through() {
        let est = SwingEstimate {
            theta_x_dot: 5.0,
            ..Default::default()
        };
        let out = swing_correction(&est, (0.3, 0.4), &SwingControlConfig::disabled()).unwrap();
        assert_eq!(out, (0.3, 0.4));
    }

    #[test]
    fn desk_gains_satisfy_passivity_bound() {
        let cfg = SwingControlConfig::desk_rig();
        assert!(cfg.gains_valid());
        assert!(0.17 >= 1.5 * 0.1);
        let bad = SwingControlConfig {
            k_theta: (0.1, 0.17),
            ..cfg
        };
        assert!(!bad.gains_valid());
    }

    #[test]
    fn near_singular_geometry_rejected() {
        let est = SwingEstimate {
            theta_x: std::f64::consts::FRAC_PI_2 - 1e-4,
            theta_x_dot: 0.1,
            ..Default::default()
        };
        assert!(matches!(
            swing_correction(&est, (0.0, 0.0), &SwingControlConfig::desk_rig()),
            Err(CraneError::NearSingularH(_))
        ));
    }

    #[test]
    fn planar_correction_matches_3d_at_zero_y() {
        let est = SwingEstimate {
            theta_x: 0.15,
            theta_x_dot: -0.2,
            ..Default::default()
        };
        let cfg = SwingControlConfig::desk_rig();
        let a3 = swing_correction(&est, (0.7, 0.0), &cfg).unwrap();
        let a2 = swing_correction_2d(&est, 0.7, &cfg).unwrap();
        assert_relative_eq!(a3.0, a2, max_relative = 1e-14);
    }

    #[test]
    fn storage_energy_values() {
        assert_eq!(storage_energy((0.0, 0.0), (0.0, 0.0), 0.3, 9.81), 0.0);
        let v = storage_energy((0.1, 0.0), (0.0, 0.0), 0.3, 9.81);
        assert_abs_diff_eq!(v, 9.81 * (1.0 - 0.1f64.cos()), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.04901, epsilon = 1e-5);
        // positive definite away from the origin
        assert!(storage_energy((0.0, 0.0), (0.1, 0.0), 0.3, 9.81) > 0.0);
        assert!(storage_energy((0.0, -0.2), (0.0, 0.0), 0.3, 9.81) > 0.0);
    }

    #[test]
    fn observer_poles_at_half_for_desk_gains() {
        let cfg = SwingObserverConfig::desk_rig(0.01);
        let (r1, r2, im) = cfg.error_poles(&cfg.gain_x);
        assert_abs_diff_eq!(r1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 0.5, epsilon = 1e-12);
        assert_eq!(im, 0.0);
        assert!(cfg.max_error_pole_radius() < 1.0);
    }

    #[test]
    fn high_gain_construction_reproduces_desk_gains() {
        let cfg = SwingObserverConfig::high_gain(0.01, 1.0, 0.25, 0.01).unwrap();
        assert_abs_diff_eq!(cfg.gain_x.l_1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.gain_x.l_2, 25.0, epsilon = 1e-12);
        // eps far below the sample time pushes the discrete error poles
        // outside the unit circle
        assert!(SwingObserverConfig::high_gain(1e-4, 1.0, 0.25, 0.01).is_err());
    }

    #[test]
    fn observer_converges_to_constant_angle() {
        let cfg = SwingObserverConfig::desk_rig(0.01);
        let mut obs = SwingObserver::new();
        let theta = 0.1;
        let mut prev_err = theta;
        for k in 0..200 {
            let est = obs.step(&cfg, theta, 0.0);
            let err = (est.theta_x - theta).abs();
            // error contracts geometrically at roughly the pole radius
            if k > 10 {
                assert!(err <= 0.8 * prev_err.max(1e-14));
            }
            prev_err = err;
        }
        assert!(obs.estimate.theta_x_dot.abs() < 1e-9);
        assert!((obs.estimate.theta_x - theta).abs() < 1e-10);
    }

    #[test]
    fn zero_innovation_propagates_by_model() {
        let cfg = SwingObserverConfig::desk_rig(0.01);
        let mut obs = SwingObserver::new();
        obs.estimate = SwingEstimate {
            theta_x: 0.05,
            theta_x_dot: 0.2,
            theta_y: -0.02,
            theta_y_dot: 0.1,
        };
        let before = obs.estimate;
        obs.step(&cfg, before.theta_x, before.theta_y);
        assert_eq!(obs.estimate.theta_x, before.theta_x + 0.01 * before.theta_x_dot);
        assert_eq!(obs.estimate.theta_x_dot, before.theta_x_dot);
    }

    #[test]
    fn observer_error_decays_at_design_rate() {
        // noiseless sinusoidal measurement: transient decays geometrically
        let cfg = SwingObserverConfig::desk_rig(0.01);
        let mut obs = SwingObserver::new();
        obs.estimate.theta_x = 0.3; // initial error
        let radius = cfg.max_error_pole_radius();
        let mut errs = Vec::new();
        for k in 0..60 {
            let meas = 0.0;
            obs.step(&cfg, meas, 0.0);
            if k % 10 == 9 {
                errs.push(obs.estimate.theta_x.abs() + obs.estimate.theta_x_dot.abs() * cfg.t_s);
            }
        }
        // over 10 steps error should shrink by at least radius^10 * slack
        for w in errs.windows(2) {
            if w[0] > 1e-12 {
                assert!(w[1] <= w[0] * radius.powi(10) * 20.0, "{} -> {}", w[0], w[1]);
            }
        }
    }

    /// Integrate the isolated swing dynamics with prescribed trolley
    /// accelerations and hoist motion (RK4).
    fn swing_sim(
        mut theta: (f64, f64),
        mut rate: (f64, f64),
        accel: impl Fn(f64, &SwingEstimate) -> (f64, f64),
        l_of_t: impl Fn(f64) -> (f64, f64),
        g: f64,
        dt: f64,
        steps: usize,
        mut on_sample: impl FnMut(f64, (f64, f64), (f64, f64), (f64, f64)),
    ) {
        let deriv = |t: f64, th: (f64, f64), rt: (f64, f64), a: (f64, f64)| {
            let (l, v_l) = l_of_t(t);
            let (sx, cx) = th.0.sin_cos();
            let (sy, cy) = th.1.sin_cos();
            let tddx = (-cx * a.0 - 2.0 * v_l * cy * rt.0 + 2.0 * l * sy * rt.0 * rt.1 - g * sx) / (l * cy);
            let tddy = (sx * sy * a.0 - cy * a.1 - 2.0 * v_l * rt.1 - l * sy * cy * rt.0 * rt.0 - g * cx * sy) / l;
            (tddx, tddy)
        };
        for k in 0..steps {
            let t = k as f64 * dt;
            let est = SwingEstimate {
                theta_x: theta.0,
                theta_x_dot: rate.0,
                theta_y: theta.1,
                theta_y_dot: rate.1,
            };
            let a = accel(t, &est);
            on_sample(t, theta, rate, a);
            // RK4 on (theta, rate) with a held over the step
            let f = |th: (f64, f64), rt: (f64, f64), tau: f64| deriv(t + tau, th, rt, a);
            let k1r = f(theta, rate, 0.0);
            let k1t = rate;
            let s2t = (theta.0 + 0.5 * dt * k1t.0, theta.1 + 0.5 * dt * k1t.1);
            let s2r = (rate.0 + 0.5 * dt * k1r.0, rate.1 + 0.5 * dt * k1r.1);
            let k2r = f(s2t, s2r, 0.5 * dt);
            let k2t = s2r;
            let s3t = (theta.0 + 0.5 * dt * k2t.0, theta.1 + 0.5 * dt * k2t.1);
            let s3r = (rate.0 + 0.5 * dt * k2r.0, rate.1 + 0.5 * dt * k2r.1);
            let k3r = f(s3t, s3r, 0.5 * dt);
            let k3t = s3r;
            let s4t = (theta.0 + dt * k3t.0, theta.1 + dt * k3t.1);
            let s4r = (rate.0 + dt * k3r.0, rate.1 + dt * k3r.1);
            let k4r = f(s4t, s4r, dt);
            let k4t = s4r;
            theta = (
                theta.0 + dt / 6.0 * (k1t.0 + 2.0 * k2t.0 + 2.0 * k3t.0 + k4t.0),
                theta.1 + dt / 6.0 * (k1t.1 + 2.0 * k2t.1 + 2.0 * k3t.1 + k4t.1),
            );
            rate = (
                rate.0 + dt / 6.0 * (k1r.0 + 2.0 * k2r.0 + 2.0 * k3r.0 + k4r.0),
                rate.1 + dt / 6.0 * (k1r.1 + 2.0 * k2r.1 + 2.0 * k3r.1 + k4r.1),
            );
        }
    }

    #[test]
    fn storage_non_increasing_when_hoisting_down() {
        // a_ref = 0, K_theta = 0, l_dot > 0: V never increases
        let g = 9.81;
        let dt = 1e-3;
        let l0 = 0.15;
        let v_l = 0.05;
        let mut prev = f64::INFINITY;
        swing_sim(
            (0.25, -0.15),
            (0.3, 0.2),
            |_, _| (0.0, 0.0),
            |t| (l0 + v_l * t, v_l),
            g,
            dt,
            4000,
            |t, th, rt, _| {
                let v = storage_energy(th, rt, l0 + v_l * t, g);
                assert!(v <= prev + 1e-10, "V increased at t={t}: {prev} -> {v}");
                prev = v;
            },
        );
    }

    #[test]
    fn hoisting_up_flips_dissipation_sign() {
        // with v_l < 0 the -1.5 l_dot rate^2 term becomes positive
        let v_l = -0.05f64;
        let rate2 = 0.3f64 * 0.3;
        assert!(-1.5 * v_l * rate2 > 0.0);
        // and numerically V can grow
        let g = 9.81;
        let l0 = 0.35;
        let mut first = None;
        let mut last = 0.0;
        swing_sim(
            (0.2, 0.0),
            (0.4, 0.0),
            |_, _| (0.0, 0.0),
            |t| (l0 + v_l * t, v_l),
            g,
            1e-3,
            2000,
            |t, th, rt, _| {
                let v = storage_energy(th, rt, l0 + v_l * t, g);
                if first.is_none() {
                    first = Some(v);
                }
                last = v;
            },
        );
        assert!(last > first.unwrap());
    }

    #[test]
    fn corrected_swing_satisfies_l2_bound() {
        // L2 gain bound of the output-strictly-passive corrected loop:
        // ||theta_dot||_L2 <= ||a_ref||_L2 / delta + sqrt(2 V(0) / delta),
        // conservative delta = min(k) - 1.5 v_l_max.
        let cfg = SwingControlConfig::desk_rig();
        let delta = cfg.k_theta.0.min(cfg.k_theta.1) - 1.5 * cfg.v_l_max;
        assert!(delta > 0.0);
        let g = 9.81;
        let dt = 1e-3;
        let steps = 8000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for run in 0..20 {
            // smooth, finitely supported random reference acceleration
            let amp: f64 = rng.gen_range(0.05..0.2);
            let f1: f64 = rng.gen_range(0.1..0.6);
            let f2: f64 = rng.gen_range(0.1..0.6);
            let t_on = 4.0;
            let a_ref = move |t: f64| {
                if t < t_on {
                    (
                        amp * (std::f64::consts::TAU * f1 * t).sin(),
                        amp * (std::f64::consts::TAU * f2 * t).cos(),
                    )
                } else {
                    (0.0, 0.0)
                }
            };
            // hoist bounded by v_l_max
            let l_mid = 0.25;
            let l_fun = move |t: f64| {
                let w = 0.8;
                (
                    l_mid + (cfg.v_l_max / w) * (w * t).sin() * 0.9,
                    cfg.v_l_max * 0.9 * (w * t).cos(),
                )
            };
            let mut sum_a2 = 0.0;
            let mut sum_r2 = 0.0;
            swing_sim(
                (0.0, 0.0),
                (0.0, 0.0),
                |t, est| {
                    let a = a_ref(t);
                    swing_correction(est, a, &cfg).unwrap()
                },
                l_fun,
                g,
                dt,
                steps,
                |t, _, rt, _| {
                    let a = a_ref(t);
                    sum_a2 += (a.0 * a.0 + a.1 * a.1) * dt;
                    sum_r2 += (rt.0 * rt.0 + rt.1 * rt.1) * dt;
                },
            );
            let bound = sum_a2.sqrt() / delta; // V(0) = 0
            assert!(
                sum_r2.sqrt() <= bound,
                "run {run}: ||rate||={} > bound {}",
                sum_r2.sqrt(),
                bound
            );
        }
    }
}
