//! Ornstein–Uhlenbeck exploration noise over the two joint deltas.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub theta: f64,
    pub mu: f64,
    /// Volatility in degrees per step.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuProcess {
    theta: f64,
    mu: [f64; 2],
    sigma: f64,
    state: [f64; 2],
}

impl OuProcess {
    pub fn new(theta: f64, mu: [f64; 2], sigma: f64) -> Self {
        assert!(
            theta >= 0.0 && sigma >= 0.0,
            "OU theta and sigma must be non-negative"
        );
        Self {
            theta,
            mu,
            sigma,
            state: mu,
        }
    }

    pub fn from_config(cfg: &OuConfig) -> Self {
        Self::new(cfg.theta, [cfg.mu; 2], cfg.sigma)
    }

    pub fn state(&self) -> [f64; 2] {
        self.state
    }

    pub fn set_state(&mut self, state: [f64; 2]) {
        self.state = state;
    }

    pub fn reset(&mut self) {
        self.state = self.mu;
    }

    /// `x ← x + θ(μ − x) + σ·g`, with `g` standard normal per dimension.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; 2] {
        for (x, mu) in self.state.iter_mut().zip(self.mu) {
            let g: f64 = if self.sigma > 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            *x += self.theta * (mu - *x) + self.sigma * g;
        }
        self.state
    }
}
