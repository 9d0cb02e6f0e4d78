use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::arbitrator::ArbitratorConfig;
use crate::env::{
    Condition, ControllerMode, KinematicsMode, TargetMode, TargetRegion, VisionMode, ARENA_SIZE,
    MAX_STEPS, TARGET_RADIUS,
};
use crate::habitual::HabitualConfig;
use crate::nn::{AdamConfig, InputScaling};
use crate::noise::OuConfig;
use crate::planning::PlanningConfig;

/// How actions are chosen during the babbling episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BabblePolicy {
    /// Uniform random joint deltas in `[-180, 180]`.
    Random,
    /// Inverse-model proposal toward a random target plus exploration noise.
    Inverse,
}

/// Everything that determines a run apart from the seed.
///
/// Serialises to a flat TOML table; every key is optional and falls back to
/// [`ExperimentConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ControllerMode,
    pub target: TargetMode,
    pub kinematics: KinematicsMode,
    pub vision: VisionMode,
    /// Total episodes including babbling.
    pub episodes: usize,
    pub max_steps: usize,
    pub babbling_episodes: usize,
    pub babble_policy: BabblePolicy,
    pub seeds: Vec<u64>,
    pub hidden: [usize; 2],
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub forward_lr: f64,
    pub inverse_lr: f64,
    pub weight_decay: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub noise_theta: f64,
    /// Exploration noise scale in degrees.
    pub noise_sigma: f64,
    /// Whether planning actions get exploration noise too. Habitual actions
    /// always do.
    pub planning_noise: bool,
    /// Store the joint displacement the plant actually made, after the
    /// joint-limit clamp, instead of the commanded action.
    pub store_executed_action: bool,
    pub rpe_threshold: f64,
    pub habitual_priority_steps: usize,
    pub planning_time_factor: f64,
    pub target_radius: f64,
    /// Where training targets are drawn from.
    pub train_region: TargetRegion,
    /// Points per axis of the test grid.
    pub test_grid: usize,
    pub train_habitual_in_spac: bool,
    pub scale_inputs: bool,
    /// Subtracted from positions before scaling; the arena centre by default.
    pub position_offset: f64,
    /// Runs executed concurrently.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ControllerMode::Apac,
            target: TargetMode::Changing,
            kinematics: KinematicsMode::Static,
            vision: VisionMode::Perfect,
            episodes: 1000,
            max_steps: MAX_STEPS,
            babbling_episodes: 100,
            babble_policy: BabblePolicy::Random,
            seeds: (0..5).collect(),
            hidden: [400, 300],
            gamma: 0.99,
            tau: 0.001,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            forward_lr: 0.01,
            inverse_lr: 0.01,
            weight_decay: 1e-3,
            replay_capacity: 1000,
            batch_size: 500,
            noise_theta: 0.15,
            noise_sigma: 36.0,
            planning_noise: false,
            store_executed_action: true,
            rpe_threshold: 1.0,
            habitual_priority_steps: 2,
            planning_time_factor: 3.0,
            target_radius: TARGET_RADIUS,
            train_region: TargetRegion::Full,
            test_grid: 10,
            train_habitual_in_spac: true,
            scale_inputs: true,
            position_offset: ARENA_SIZE / 2.0,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    /// Narrower hidden layers so a full run fits in well under a minute on
    /// one core. Everything else keeps the defaults.
    pub fn desk() -> Self {
        Self {
            hidden: DESK_HIDDEN,
            ..Self::default()
        }
    }

    pub fn with_condition(mut self, c: Condition) -> Self {
        self.model = c.controller;
        self.target = c.target;
        self.kinematics = c.kinematics;
        self.vision = c.vision;
        self
    }

    pub fn condition(&self) -> Result<Condition> {
        Ok(Condition::new(
            self.target,
            self.kinematics,
            self.vision,
            self.model,
        )?)
    }

    pub fn validate(&self) -> Result<()> {
        self.condition()?;
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.episodes <= self.babbling_episodes {
            return fail(format!(
                "episodes ({}) must exceed babbling_episodes ({})",
                self.episodes, self.babbling_episodes
            ));
        }
        if self.max_steps == 0 {
            return fail("max_steps must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return fail(format!(
                "batch_size ({}) must be in 1..=replay_capacity ({})",
                self.batch_size, self.replay_capacity
            ));
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma and tau must lie in [0, 1]".into());
        }
        if !(self.noise_theta >= 0.0 && self.noise_sigma >= 0.0) {
            return fail("noise_theta and noise_sigma must be non-negative".into());
        }
        if !(self.planning_time_factor >= 1.0) {
            return fail("planning_time_factor must be at least 1".into());
        }
        if !(self.target_radius > 0.0) {
            return fail("target_radius must be positive".into());
        }
        if self.test_grid < 2 {
            return fail("test_grid needs at least two points per axis".into());
        }
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        if self.babble_policy == BabblePolicy::Inverse && self.model == ControllerMode::Ddpg {
            return fail(
                "inverse babbling needs the internal models, which ddpg does not have".into(),
            );
        }
        self.arbitrator_config()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        for lr in [
            self.actor_lr,
            self.critic_lr,
            self.forward_lr,
            self.inverse_lr,
        ] {
            AdamConfig::new(lr, self.weight_decay).validate()?;
        }
        Ok(())
    }

    pub fn scaling(&self) -> InputScaling {
        let base = if self.scale_inputs {
            InputScaling::default()
        } else {
            InputScaling::IDENTITY
        };
        InputScaling {
            position_offset: self.position_offset,
            ..base
        }
    }

    pub fn habitual_config(&self) -> HabitualConfig {
        HabitualConfig {
            hidden: self.hidden,
            gamma: self.gamma,
            tau: self.tau,
            actor_adam: AdamConfig::new(self.actor_lr, self.weight_decay),
            critic_adam: AdamConfig::new(self.critic_lr, self.weight_decay),
            scaling: self.scaling(),
        }
    }

    pub fn planning_config(&self) -> PlanningConfig {
        PlanningConfig {
            hidden: self.hidden,
            forward_adam: AdamConfig::new(self.forward_lr, self.weight_decay),
            inverse_adam: AdamConfig::new(self.inverse_lr, self.weight_decay),
            scaling: self.scaling(),
        }
    }

    pub fn arbitrator_config(&self) -> ArbitratorConfig {
        ArbitratorConfig {
            mode: self.model,
            rpe_threshold: self.rpe_threshold,
            habitual_priority_steps: self.habitual_priority_steps,
        }
    }

    pub fn ou_config(&self) -> OuConfig {
        OuConfig {
            theta: self.noise_theta,
            mu: 0.0,
            sigma: self.noise_sigma,
        }
    }

    /// Whether the forward and inverse models exist and are trained.
    pub fn uses_internal_models(&self) -> bool {
        self.model != ControllerMode::Ddpg
    }

    pub fn trains_habitual(&self) -> bool {
        self.model != ControllerMode::Spac || self.train_habitual_in_spac
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

pub const DESK_HIDDEN: [usize; 2] = [64, 48];
