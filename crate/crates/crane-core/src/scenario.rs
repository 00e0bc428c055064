//! Scenario configuration: which controller, which compensation paths,
//! which trajectory, and the run bookkeeping.
//!
//! The three canonical test scenarios gate the compensation paths:
//! Scenario I runs bare tracking (no feedforward, no swing control),
//! Scenario II adds disturbance feedforward, Scenario III adds swing
//! damping on top.

use serde::{Deserialize, Serialize};

use crate::error::{CraneError, Result};
use crate::mpc::MpcConfig;
use crate::plant::CraneMode;
use crate::sfb::SfbConfig;
use crate::swing::{SwingControlConfig, SwingObserverConfig};
use crate::traj::{LspbSpec, MinTimeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Mpc,
    Sfb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedforwardSource {
    None,
    ComputedTorque,
    Dob,
}

/// Canonical scenario labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    I,
    II,
    III,
}

impl Scenario {
    /// (feedforward on, swing control on)
    pub fn flags(&self) -> (bool, bool) {
        match self {
            Scenario::I => (false, false),
            Scenario::II => (true, false),
            Scenario::III => (true, true),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedPreset {
    Slow,
    Fast,
}

/// Trajectory of one out transition (the back transition mirrors it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSpec {
    /// Traveling profile.
    pub x: LspbSpec,
    /// Traversing profile (null move in 2D mode).
    pub y: LspbSpec,
    /// Hoist-up profile over the acceleration zone.
    pub hoist_up: MinTimeSpec,
    /// Hoist-down profile over the deceleration zone.
    pub hoist_down: MinTimeSpec,
}

impl TransitionSpec {
    /// The tabulated slow trajectory: 0.45 m travel/traverse moves in 9 s
    /// with a 4 s blend; hoisting 0.25 -> 0.05 m up and back down.
    pub fn slow() -> Self {
        let lspb = LspbSpec {
            q_0: 5e-2,
            q_f: 50e-2,
            a: 22.5e-3,
            v_m: 9e-2,
            t_b: 4.0,
            t_f: 9.0,
        };
        TransitionSpec {
            x: lspb,
            y: lspb,
            hoist_up: MinTimeSpec {
                q_0: 25e-2,
                q_f: 5e-2,
                a: 50e-3,
                t_f: 4.0,
            },
            hoist_down: MinTimeSpec {
                q_0: 5e-2,
                q_f: 25e-2,
                a: 50e-3,
                t_f: 4.0,
            },
        }
    }

    /// The tabulated fast trajectory: same moves in 5 s with a 2 s blend.
    /// The tabulated hoisting row is over-determined and inconsistent, so
    /// the profile is derived from endpoints and duration (0.10 -> 0.02 m
    /// up during acceleration, back down during deceleration).
    pub fn fast() -> Self {
        let lspb = LspbSpec {
            q_0: 5e-2,
            q_f: 50e-2,
            a: 75e-3,
            v_m: 15e-2,
            t_b: 2.0,
            t_f: 5.0,
        };
        TransitionSpec {
            x: lspb,
            y: lspb,
            hoist_up: MinTimeSpec::from_endpoints(10e-2, 2e-2, 2.0).expect("valid duration"),
            hoist_down: MinTimeSpec::from_endpoints(2e-2, 10e-2, 2.0).expect("valid duration"),
        }
    }

    pub fn preset(speed: SpeedPreset) -> Self {
        match speed {
            SpeedPreset::Slow => Self::slow(),
            SpeedPreset::Fast => Self::fast(),
        }
    }

    /// Mirror image for the return leg.
    pub fn reversed(&self) -> Self {
        let flip = |s: &LspbSpec| LspbSpec {
            q_0: s.q_f,
            q_f: s.q_0,
            ..*s
        };
        TransitionSpec {
            x: flip(&self.x),
            y: flip(&self.y),
            hoist_up: self.hoist_up,
            hoist_down: self.hoist_down,
        }
    }

    /// Degenerate traversing move for planar runs.
    pub fn with_null_y(mut self) -> Self {
        self.y = LspbSpec {
            q_0: self.y.q_0,
            q_f: self.y.q_0,
            a: 0.0,
            v_m: 0.0,
            ..self.y
        };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryChoice {
    Slow,
    Fast,
    Custom(TransitionSpec),
}

/// Full configuration of one closed-loop run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub controller: ControllerKind,
    pub feedforward: FeedforwardSource,
    pub swing_control: bool,
    pub trajectory: TrajectoryChoice,
    pub mode: CraneMode,
    /// True load mass on the hook, kg.
    pub load_mass: f64,
    /// Load mass the computed-torque path assumes (defaults to load_mass).
    pub model_mass: Option<f64>,
    /// Out-and-back round trips.
    pub repetitions: usize,
    pub seed: u64,
    pub t_s: f64,
    pub substeps: usize,
    /// Rest between transitions, s.
    pub rest_time: f64,
    /// Multiplier on the true plant inertia/damping relative to the
    /// controller's model (1 = nominal).
    pub plant_mismatch: f64,
    /// Quantize position and angle measurements to 4096 counts/rev.
    pub encoder_quantization: bool,
    pub v_max: f64,
    pub a_max: f64,
    pub mpc: MpcConfig,
    pub sfb: SfbConfig,
    pub swing_gains: SwingControlConfig,
    pub swing_observer: SwingObserverParams,
}

/// Serializable swing-observer gain block (expanded to a
/// `SwingObserverConfig` with the run's sample time).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SwingObserverParams {
    pub l_1: f64,
    pub l_2: f64,
}

impl Default for SwingObserverParams {
    fn default() -> Self {
        SwingObserverParams { l_1: 1.0, l_2: 25.0 }
    }
}

impl SwingObserverParams {
    pub fn build(&self, t_s: f64) -> SwingObserverConfig {
        let g = crate::swing::ObserverGain {
            l_1: self.l_1,
            l_2: self.l_2,
        };
        SwingObserverConfig {
            gain_x: g,
            gain_y: g,
            t_s,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            controller: ControllerKind::Sfb,
            feedforward: FeedforwardSource::ComputedTorque,
            swing_control: true,
            trajectory: TrajectoryChoice::Slow,
            mode: CraneMode::ThreeD,
            load_mass: 0.8,
            model_mass: None,
            repetitions: 1,
            seed: 0,
            t_s: 0.01,
            substeps: 10,
            rest_time: 1.0,
            plant_mismatch: 1.0,
            encoder_quantization: false,
            v_max: 0.3,
            a_max: 0.2,
            mpc: MpcConfig::desk_rig(),
            sfb: SfbConfig::desk_rig(),
            swing_gains: SwingControlConfig::desk_rig(),
            swing_observer: SwingObserverParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// One of the canonical runs: controller x scenario x speed x mass.
    pub fn canonical(
        controller: ControllerKind,
        scenario: Scenario,
        speed: SpeedPreset,
        load_mass: f64,
    ) -> Self {
        let (ff, lsc) = scenario.flags();
        ScenarioConfig {
            controller,
            feedforward: if ff {
                FeedforwardSource::ComputedTorque
            } else {
                FeedforwardSource::None
            },
            swing_control: lsc,
            trajectory: match speed {
                SpeedPreset::Slow => TrajectoryChoice::Slow,
                SpeedPreset::Fast => TrajectoryChoice::Fast,
            },
            load_mass,
            ..ScenarioConfig::default()
        }
    }

    pub fn transition_spec(&self) -> TransitionSpec {
        let base = match self.trajectory {
            TrajectoryChoice::Slow => TransitionSpec::slow(),
            TrajectoryChoice::Fast => TransitionSpec::fast(),
            TrajectoryChoice::Custom(spec) => spec,
        };
        match self.mode {
            CraneMode::ThreeD => base,
            CraneMode::TwoD => base.with_null_y(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_s > 0.0) || self.substeps == 0 {
            return Err(CraneError::Config(format!(
                "t_s = {}, substeps = {}",
                self.t_s, self.substeps
            )));
        }
        if self.repetitions == 0 {
            return Err(CraneError::Config("repetitions must be >= 1".into()));
        }
        if self.load_mass < 0.0 {
            return Err(CraneError::Config(format!("load_mass = {}", self.load_mass)));
        }
        if self.swing_control && !self.swing_gains.gains_valid() {
            return Err(CraneError::Config(
                "swing gains below the 1.5 * v_l_max passivity bound".into(),
            ));
        }
        self.mpc.validate()?;
        let spec = self.transition_spec();
        // the traversing null move is exempt from the blend identities
        for (name, s, null_ok) in [("x", &spec.x, false), ("y", &spec.y, self.mode == CraneMode::TwoD)]
        {
            if null_ok && s.q_0 == s.q_f {
                continue;
            }
            let issues = crate::traj::validate_spec(s, self.v_max, self.a_max, self.t_s);
            if !issues.is_empty() {
                return Err(CraneError::Config(format!(
                    "{name} trajectory spec invalid: {}",
                    issues
                        .iter()
                        .map(|v| v.what.as_str())
                        .collect::<Vec<_>>()
                        .join("; ")
                )));
            }
        }
        for (name, s) in [("hoist-up", &spec.hoist_up), ("hoist-down", &spec.hoist_down)] {
            let issues = crate::traj::validate_mintime(s, self.v_max, self.a_max, self.t_s);
            if !issues.is_empty() {
                return Err(CraneError::Config(format!(
                    "{name} spec invalid: {}",
                    issues
                        .iter()
                        .map(|v| v.what.as_str())
                        .collect::<Vec<_>>()
                        .join("; ")
                )));
            }
            if s.t_f > spec.x.t_b + 1e-12 {
                return Err(CraneError::Config(format!(
                    "{name} duration {} exceeds the blend window {}",
                    s.t_f, spec.x.t_b
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| CraneError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
