//! Model-free habitual controller: a deterministic actor-critic with target
//! networks, trained from replayed transitions.
//!
//! The critic has two input paths. The state goes through two layers, the
//! second one linear, and the action through one linear layer of the same
//! width. The two are summed and passed through a relu before the scalar
//! value head. Joining them before the nonlinearity keeps `Q` from splitting
//! into a state term plus an action term, which would make the action
//! gradient the same in every state.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, StateVector};
use crate::nn::{self, Activation, AdamConfig, Gradients, InputScaling, Mlp, NnError, Trace};
use crate::replay::Transition;

pub const ACTION_SCALE: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HabitualConfig {
    /// Widths of the actor's hidden layers and of the critic's state path.
    /// The critic's action path uses the second width.
    pub hidden: [usize; 2],
    pub gamma: f64,
    pub tau: f64,
    pub actor_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    pub scaling: InputScaling,
}

impl Default for HabitualConfig {
    fn default() -> Self {
        Self {
            hidden: [400, 300],
            gamma: 0.99,
            tau: 0.001,
            actor_adam: AdamConfig::new(1e-4, 1e-3),
            critic_adam: AdamConfig::new(1e-3, 1e-3),
            scaling: InputScaling::default(),
        }
    }
}

/// Scales each row of raw states into network units.
pub fn state_matrix(
    states: impl ExactSizeIterator<Item = StateVector>,
    scaling: &InputScaling,
) -> Array2<f64> {
    let n = states.len();
    let mut out = Array2::zeros((n, 6));
    for (mut row, s) in out.rows_mut().into_iter().zip(states) {
        for (dst, v) in row.iter_mut().zip(s) {
            *dst = scaling.position(v);
        }
    }
    out
}

pub fn action_matrix(
    actions: impl ExactSizeIterator<Item = Action>,
    scaling: &InputScaling,
) -> Array2<f64> {
    let n = actions.len();
    let mut out = Array2::zeros((n, 2));
    for (mut row, a) in out.rows_mut().into_iter().zip(actions) {
        row[0] = a[0] / scaling.angle;
        row[1] = a[1] / scaling.angle;
    }
    out
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

pub fn actor_network<R: Rng + ?Sized>(hidden: [usize; 2], rng: &mut R) -> nn::Result<Mlp> {
    Mlp::new(
        &[6, hidden[0], hidden[1], 2],
        &[Activation::Relu, Activation::Relu, Activation::Tanh],
        ACTION_SCALE,
        rng,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub state_path: Mlp,
    pub action_path: Mlp,
    pub head: Mlp,
}

pub struct CriticTrace {
    state: Trace,
    action: Trace,
    /// Sum of both path outputs, before the relu.
    joined: Array2<f64>,
    head: Trace,
}

impl CriticTrace {
    pub fn q(&self) -> Array1<f64> {
        self.head.output().column(0).to_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGradients {
    pub state_path: Gradients,
    pub action_path: Gradients,
    pub head: Gradients,
}

impl CriticGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.state_path.flatten();
        v.extend(self.action_path.flatten());
        v.extend(self.head.flatten());
        v
    }
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(hidden: [usize; 2], rng: &mut R) -> nn::Result<Self> {
        Ok(Self {
            state_path: Mlp::new(
                &[6, hidden[0], hidden[1]],
                &[Activation::Relu, Activation::Linear],
                1.0,
                rng,
            )?,
            action_path: Mlp::new(&[2, hidden[1]], &[Activation::Linear], 1.0, rng)?,
            head: Mlp::new(&[hidden[1], 1], &[Activation::Linear], 1.0, rng)?,
        })
    }

    pub fn zeros(hidden: [usize; 2]) -> nn::Result<Self> {
        Ok(Self {
            state_path: Mlp::zeros(
                &[6, hidden[0], hidden[1]],
                &[Activation::Relu, Activation::Linear],
                1.0,
            )?,
            action_path: Mlp::zeros(&[2, hidden[1]], &[Activation::Linear], 1.0)?,
            head: Mlp::zeros(&[hidden[1], 1], &[Activation::Linear], 1.0)?,
        })
    }

    /// Inputs are already in network units.
    pub fn trace(
        &self,
        states: ArrayView2<'_, f64>,
        actions: ArrayView2<'_, f64>,
    ) -> nn::Result<CriticTrace> {
        let state = self.state_path.forward_trace(states)?;
        let action = self.action_path.forward_trace(actions)?;
        let joined = state.output() + action.output();
        let head = self.head.forward_trace(joined.mapv(relu).view())?;
        Ok(CriticTrace {
            state,
            action,
            joined,
            head,
        })
    }

    pub fn q_values(
        &self,
        states: ArrayView2<'_, f64>,
        actions: ArrayView2<'_, f64>,
    ) -> nn::Result<Array1<f64>> {
        let mut joined = self.state_path.forward_batch(states)?;
        joined += &self.action_path.forward_batch(actions)?;
        joined.mapv_inplace(relu);
        Ok(self.head.forward_batch(joined.view())?.column(0).to_owned())
    }

    /// Backpropagates `d_q` (one entry per sample). Returns parameter
    /// gradients (if requested) and the gradients with respect to the state
    /// and action inputs.
    pub fn backward(
        &self,
        trace: &CriticTrace,
        d_q: &Array1<f64>,
        with_params: bool,
    ) -> nn::Result<(Option<CriticGradients>, Array2<f64>, Array2<f64>)> {
        let d_out = d_q.view().insert_axis(Axis(1));
        let mask = |mut d: Array2<f64>| {
            Zip::from(&mut d).and(&trace.joined).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            d
        };
        if with_params {
            let (head, d_relu) = self.head.backward(&trace.head, d_out)?;
            let d_joined = mask(d_relu);
            let (state_path, d_states) = self.state_path.backward(&trace.state, d_joined.view())?;
            let (action_path, d_actions) =
                self.action_path.backward(&trace.action, d_joined.view())?;
            Ok((
                Some(CriticGradients {
                    state_path,
                    action_path,
                    head,
                }),
                d_states,
                d_actions,
            ))
        } else {
            let d_joined = mask(self.head.backward_input(&trace.head, d_out)?);
            let d_states = self
                .state_path
                .backward_input(&trace.state, d_joined.view())?;
            let d_actions = self
                .action_path
                .backward_input(&trace.action, d_joined.view())?;
            Ok((None, d_states, d_actions))
        }
    }

    /// `(1/N) Σ (q − y)²` with parameter gradients.
    pub fn mse_gradients(
        &self,
        states: ArrayView2<'_, f64>,
        actions: ArrayView2<'_, f64>,
        targets: &Array1<f64>,
    ) -> nn::Result<(f64, CriticGradients)> {
        if states.nrows() == 0 {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        let trace = self.trace(states, actions)?;
        let residual = trace.q() - targets;
        let n = states.nrows() as f64;
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / n;
        let d_q = residual * (2.0 / n);
        let (grads, _, _) = self.backward(&trace, &d_q, true)?;
        Ok((loss, grads.expect("requested")))
    }

    pub fn apply_gradients(&mut self, grads: &CriticGradients, cfg: &AdamConfig) -> nn::Result<()> {
        self.state_path.apply_gradients(&grads.state_path, cfg)?;
        self.action_path.apply_gradients(&grads.action_path, cfg)?;
        self.head.apply_gradients(&grads.head, cfg)
    }

    pub fn soft_update_from(&mut self, main: &Critic, tau: f64) -> nn::Result<()> {
        self.state_path.soft_update_from(&main.state_path, tau)?;
        self.action_path.soft_update_from(&main.action_path, tau)?;
        self.head.soft_update_from(&main.head, tau)
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut v = self.state_path.parameters();
        v.extend(self.action_path.parameters());
        v.extend(self.head.parameters());
        v
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> nn::Result<()> {
        let a = self.state_path.num_parameters();
        let b = a + self.action_path.num_parameters();
        if params.len() != b + self.head.num_parameters() {
            return Err(NnError::InvalidInput(
                "critic parameter count mismatch".into(),
            ));
        }
        self.state_path.set_parameters(&params[..a])?;
        self.action_path.set_parameters(&params[a..b])?;
        self.head.set_parameters(&params[b..])
    }

    pub fn clone_parameters(&self) -> Critic {
        Critic {
            state_path: self.state_path.clone_parameters(),
            action_path: self.action_path.clone_parameters(),
            head: self.head.clone_parameters(),
        }
    }

    /// Three consecutive network records: state path, action path, head.
    pub fn write_to<W: Write>(&self, out: &mut W) -> nn::Result<()> {
        self.state_path.write_to(out)?;
        self.action_path.write_to(out)?;
        self.head.write_to(out)
    }

    pub fn read_from<R: Read>(input: &mut R) -> nn::Result<Critic> {
        let state_path = Mlp::read_from(input)?;
        let action_path = Mlp::read_from(input)?;
        let head = Mlp::read_from(input)?;
        if state_path.input_dim() != 6
            || action_path.input_dim() != 2
            || state_path.output_dim() != action_path.output_dim()
            || head.input_dim() != state_path.output_dim()
            || head.output_dim() != 1
        {
            return Err(NnError::Format(
                "critic sub-networks do not fit together".into(),
            ));
        }
        Ok(Critic {
            state_path,
            action_path,
            head,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Critic,
    pub critic_target: Critic,
    pub cfg: HabitualConfig,
}

impl ActorCritic {
    /// Random main networks; targets start as exact copies.
    pub fn new<R: Rng + ?Sized>(cfg: HabitualConfig, rng: &mut R) -> nn::Result<Self> {
        cfg.actor_adam.validate()?;
        cfg.critic_adam.validate()?;
        let actor = actor_network(cfg.hidden, rng)?;
        let critic = Critic::new(cfg.hidden, rng)?;
        Ok(Self {
            actor_target: actor.clone_parameters(),
            critic_target: critic.clone_parameters(),
            actor,
            critic,
            cfg,
        })
    }

    fn states(&self, batch: &[Transition], next: bool) -> Array2<f64> {
        state_matrix(
            batch.iter().map(|t| if next { t.s_next } else { t.s }),
            &self.cfg.scaling,
        )
    }

    fn scale_actions(&self, raw: &Array2<f64>) -> Array2<f64> {
        raw / self.cfg.scaling.angle
    }

    /// Action proposal from the target actor (exploration noise is the caller's job).
    pub fn act(&self, s: &StateVector) -> Action {
        let x = s.map(|v| self.cfg.scaling.position(v));
        let out = self
            .actor_target
            .forward(&x)
            .expect("actor input is 6-wide");
        [out[0], out[1]]
    }

    /// `Q(s, a)` under the main critic, raw units in.
    pub fn q_value(&self, s: &StateVector, a: &Action) -> f64 {
        self.critic_q(&self.critic, s, a)
    }

    pub fn target_q_value(&self, s: &StateVector, a: &Action) -> f64 {
        self.critic_q(&self.critic_target, s, a)
    }

    fn critic_q(&self, critic: &Critic, s: &StateVector, a: &Action) -> f64 {
        let st = state_matrix(std::iter::once(*s), &self.cfg.scaling);
        let ac = action_matrix(std::iter::once(*a), &self.cfg.scaling);
        critic.q_values(st.view(), ac.view()).expect("fixed shapes")[0]
    }

    /// `y = r + γ·Q'(s', π'(s'))`, or `y = r` at terminal transitions.
    pub fn td_targets(&self, batch: &[Transition]) -> Array1<f64> {
        let next = self.states(batch, true);
        let next_actions = self
            .actor_target
            .forward_batch(next.view())
            .expect("fixed shapes");
        let q_next = self
            .critic_target
            .q_values(next.view(), self.scale_actions(&next_actions).view())
            .expect("fixed shapes");
        batch
            .iter()
            .zip(q_next.iter())
            .map(|(t, &q)| {
                if t.terminal {
                    t.r
                } else {
                    t.r + self.cfg.gamma * q
                }
            })
            .collect()
    }

    /// One Adam step of the main critic toward the TD targets. Returns the
    /// pre-step mean squared TD error.
    pub fn train_critic(&mut self, batch: &[Transition]) -> nn::Result<f64> {
        if batch.is_empty() {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        let y = self.td_targets(batch);
        let states = self.states(batch, false);
        let actions = action_matrix(batch.iter().map(|t| t.a), &self.cfg.scaling);
        let (loss, grads) = self
            .critic
            .mse_gradients(states.view(), actions.view(), &y)?;
        self.critic.apply_gradients(&grads, &self.cfg.critic_adam)?;
        Ok(loss)
    }

    /// Mean `Q(s, π(s))` over the batch states and its gradient with respect
    /// to the main actor's parameters.
    pub fn actor_objective_gradient(&self, batch: &[Transition]) -> nn::Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        let states = self.states(batch, false);
        let actor_trace = self.actor.forward_trace(states.view())?;
        let actions = self.scale_actions(actor_trace.output());
        let critic_trace = self.critic.trace(states.view(), actions.view())?;
        let q = critic_trace.q();
        let n = batch.len() as f64;
        let mean_q = q.sum() / n;
        let d_q = Array1::from_elem(batch.len(), 1.0 / n);
        let (_, _, d_actions) = self.critic.backward(&critic_trace, &d_q, false)?;
        // chain through the action scaling back to raw degrees
        let d_raw = d_actions / self.cfg.scaling.angle;
        let (grads, _) = self.actor.backward(&actor_trace, d_raw.view())?;
        Ok((mean_q, grads))
    }

    /// One Adam ascent step on the mean critic value of the actor's actions.
    pub fn train_actor(&mut self, batch: &[Transition]) -> nn::Result<()> {
        let (_, mut grads) = self.actor_objective_gradient(batch)?;
        grads
            .weights
            .iter_mut()
            .for_each(|g| g.mapv_inplace(|v| -v));
        grads.biases.iter_mut().for_each(|g| g.mapv_inplace(|v| -v));
        self.actor.apply_gradients(&grads, &self.cfg.actor_adam)
    }

    pub fn update_targets(&mut self) -> nn::Result<()> {
        let tau = self.cfg.tau;
        self.actor_target.soft_update_from(&self.actor, tau)?;
        self.critic_target.soft_update_from(&self.critic, tau)
    }

    /// Reward prediction error of one transition:
    /// `δ = r + γ·Q'(s', π'(s'))·(1 − terminal) − Q(s, a)`.
    pub fn rpe(&self, last: &Transition) -> f64 {
        let y = self.td_targets(std::slice::from_ref(last))[0];
        y - self.q_value(&last.s, &last.a)
    }
}
