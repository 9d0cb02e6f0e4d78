//! Adaptive planning actor-critic: a two-joint reaching arm controlled by a
//! habitual DDPG learner and a model-based planner, with an arbitrator that
//! hands control to the planner when the reward prediction error is large.

pub mod arbitrator;
pub mod env;
pub mod habitual;
pub mod harness;
pub mod nn;
pub mod noise;
pub mod planning;
pub mod replay;
