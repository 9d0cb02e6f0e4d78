//! Per-step choice between habitual and planning proposals, and the state
//! integrator that switches between vision and forward-model prediction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, ControllerMode, Observation, Point, StateVector, VisionMode};

#[derive(Debug, Error, PartialEq)]
pub enum ArbitratorError {
    #[error("invalid arbitrator config: {0}")]
    InvalidConfig(String),
    #[error("perfect vision requires an actual observation")]
    MissingObservation,
    #[error("occluded vision requires the target remembered from step 0")]
    MissingTargetMemory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitratorConfig {
    pub mode: ControllerMode,
    pub rpe_threshold: f64,
    pub habitual_priority_steps: usize,
}

impl ArbitratorConfig {
    pub fn new(mode: ControllerMode) -> Self {
        Self {
            mode,
            rpe_threshold: 1.0,
            habitual_priority_steps: 2,
        }
    }

    pub fn validate(&self) -> Result<(), ArbitratorError> {
        if !(self.rpe_threshold.is_finite() && self.rpe_threshold > 0.0) {
            return Err(ArbitratorError::InvalidConfig(format!(
                "rpe_threshold must be positive, got {}",
                self.rpe_threshold
            )));
        }
        Ok(())
    }

    /// Which controller acts at `step`. Callers only need to query that
    /// controller, so DDPG never consults the planner.
    pub fn source_for(&self, step: usize, last_rpe: Option<f64>) -> Source {
        match self.mode {
            ControllerMode::Ddpg => Source::Habitual,
            ControllerMode::Spac => Source::Planning,
            ControllerMode::Apac => {
                if step < self.habitual_priority_steps {
                    return Source::Habitual;
                }
                match last_rpe {
                    Some(d) if d.abs() < self.rpe_threshold => Source::Habitual,
                    _ => Source::Planning,
                }
            }
        }
    }

    /// Whether the RPE of the last transition is needed at `step`.
    pub fn needs_rpe(&self, step: usize) -> bool {
        self.mode == ControllerMode::Apac && step >= self.habitual_priority_steps
    }

    pub fn select(
        &self,
        step: usize,
        last_rpe: Option<f64>,
        habitual: Action,
        planning: Action,
    ) -> ActionChoice {
        let source = self.source_for(step, last_rpe);
        let action = match source {
            Source::Habitual => habitual,
            Source::Planning => planning,
        };
        ActionChoice { action, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Habitual,
    Planning,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionChoice {
    pub action: Action,
    pub source: Source,
}

/// State estimate fed to the controllers.
///
/// With perfect vision this is the actual observation. With occluded vision
/// it is the forward-model prediction plus the target seen at step 0.
pub fn integrate(
    vision: VisionMode,
    actual: Option<&Observation>,
    predicted_end: Point,
    predicted_elbow: Point,
    remembered_target: Option<Point>,
) -> Result<StateVector, ArbitratorError> {
    match vision {
        VisionMode::Perfect => actual
            .map(Observation::state_vector)
            .ok_or(ArbitratorError::MissingObservation),
        VisionMode::Occluded => {
            let target = remembered_target.ok_or(ArbitratorError::MissingTargetMemory)?;
            Ok(Observation {
                end: predicted_end,
                elbow: predicted_elbow,
                target,
            }
            .state_vector())
        }
    }
}
