//! Supervised internal models of the arm.
//!
//! The forward model maps `(end, elbow, action)` to the next `(end, elbow)`.
//! The inverse model maps `(end, elbow, desired end)` to the action that
//! gets there; it is trained on replayed transitions with the achieved next
//! end position in the target slot, and queried with the real target.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Point, StateVector, ARENA_SIZE};
use crate::habitual::ACTION_SCALE;
use crate::nn::{self, Activation, AdamConfig, InputScaling, Mlp, NnError};
use crate::replay::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanningConfig {
    pub hidden: [usize; 2],
    pub forward_adam: AdamConfig,
    pub inverse_adam: AdamConfig,
    pub scaling: InputScaling,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        Self {
            hidden: [400, 300],
            forward_adam: AdamConfig::new(0.01, 1e-3),
            inverse_adam: AdamConfig::new(0.01, 1e-3),
            scaling: InputScaling::default(),
        }
    }
}

pub fn forward_network<R: Rng + ?Sized>(hidden: [usize; 2], rng: &mut R) -> nn::Result<Mlp> {
    Mlp::new(
        &[6, hidden[0], hidden[1], 4],
        &[
            Activation::Sigmoid,
            Activation::Sigmoid,
            Activation::Sigmoid,
        ],
        ARENA_SIZE,
        rng,
    )
}

pub fn inverse_network<R: Rng + ?Sized>(hidden: [usize; 2], rng: &mut R) -> nn::Result<Mlp> {
    Mlp::new(
        &[6, hidden[0], hidden[1], 2],
        &[Activation::Relu, Activation::Relu, Activation::Tanh],
        ACTION_SCALE,
        rng,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalModels {
    pub forward_net: Mlp,
    pub inverse_net: Mlp,
    pub cfg: PlanningConfig,
}

impl InternalModels {
    pub fn new<R: Rng + ?Sized>(cfg: PlanningConfig, rng: &mut R) -> nn::Result<Self> {
        cfg.forward_adam.validate()?;
        cfg.inverse_adam.validate()?;
        Ok(Self {
            forward_net: forward_network(cfg.hidden, rng)?,
            inverse_net: inverse_network(cfg.hidden, rng)?,
            cfg,
        })
    }

    fn forward_features(&self, end: Point, elbow: Point, a: &Action) -> [f64; 6] {
        let p = |v| self.cfg.scaling.position(v);
        let g = self.cfg.scaling.angle;
        [
            p(end.x),
            p(end.y),
            p(elbow.x),
            p(elbow.y),
            a[0] / g,
            a[1] / g,
        ]
    }

    fn inverse_features(&self, end: Point, elbow: Point, goal: Point) -> [f64; 6] {
        let p = |v| self.cfg.scaling.position(v);
        [
            p(end.x),
            p(end.y),
            p(elbow.x),
            p(elbow.y),
            p(goal.x),
            p(goal.y),
        ]
    }

    /// Predicted `(end, elbow)` after applying `a`.
    pub fn predict_next(&self, end: Point, elbow: Point, a: &Action) -> (Point, Point) {
        let out = self
            .forward_net
            .forward(&self.forward_features(end, elbow, a))
            .expect("forward model input is 6-wide");
        (Point::new(out[0], out[1]), Point::new(out[2], out[3]))
    }

    /// Inverse-model action that should bring the end-effector onto the
    /// target slot of `s`.
    pub fn plan_action(&self, s: &StateVector) -> Action {
        let x = self.inverse_features(
            Point::new(s[0], s[1]),
            Point::new(s[2], s[3]),
            Point::new(s[4], s[5]),
        );
        let out = self
            .inverse_net
            .forward(&x)
            .expect("inverse model input is 6-wide");
        [out[0], out[1]]
    }

    /// Inputs `[end, elbow, a]` and targets `[end', elbow']` for a batch.
    pub fn forward_training_pairs(&self, batch: &[Transition]) -> (Array2<f64>, Array2<f64>) {
        let mut inputs = Array2::zeros((batch.len(), 6));
        let mut targets = Array2::zeros((batch.len(), 4));
        for (i, t) in batch.iter().enumerate() {
            let x =
                self.forward_features(Point::new(t.s[0], t.s[1]), Point::new(t.s[2], t.s[3]), &t.a);
            inputs
                .row_mut(i)
                .iter_mut()
                .zip(x)
                .for_each(|(d, v)| *d = v);
            targets
                .row_mut(i)
                .iter_mut()
                .zip(&t.s_next[..4])
                .for_each(|(d, &v)| *d = v);
        }
        (inputs, targets)
    }

    /// Inputs `[end, elbow, next end]` and targets `a` for a batch.
    pub fn inverse_training_pairs(&self, batch: &[Transition]) -> (Array2<f64>, Array2<f64>) {
        let mut inputs = Array2::zeros((batch.len(), 6));
        let mut targets = Array2::zeros((batch.len(), 2));
        for (i, t) in batch.iter().enumerate() {
            let x = self.inverse_features(
                Point::new(t.s[0], t.s[1]),
                Point::new(t.s[2], t.s[3]),
                Point::new(t.s_next[0], t.s_next[1]),
            );
            inputs
                .row_mut(i)
                .iter_mut()
                .zip(x)
                .for_each(|(d, v)| *d = v);
            targets[[i, 0]] = t.a[0];
            targets[[i, 1]] = t.a[1];
        }
        (inputs, targets)
    }

    /// One MSE Adam step of the forward model; returns the pre-step loss.
    pub fn train_forward(&mut self, batch: &[Transition]) -> nn::Result<f64> {
        if batch.is_empty() {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        let (x, y) = self.forward_training_pairs(batch);
        self.forward_net
            .train_step(x.view(), y.view(), &self.cfg.forward_adam)
    }

    /// One MSE Adam step of the inverse model; returns the pre-step loss.
    pub fn train_inverse(&mut self, batch: &[Transition]) -> nn::Result<f64> {
        if batch.is_empty() {
            return Err(NnError::InvalidInput("empty batch".into()));
        }
        let (x, y) = self.inverse_training_pairs(batch);
        self.inverse_net
            .train_step(x.view(), y.view(), &self.cfg.inverse_adam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{forward_kinematics, DEFAULT_ORIGIN};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> InternalModels {
        let cfg = PlanningConfig {
            hidden: [10, 8],
            ..PlanningConfig::default()
        };
        InternalModels::new(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
        let (alpha, beta) = (rng.random_range(0.0..180.0), rng.random_range(0.0..180.0));
        let a = [rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)];
        let (end, elbow) = forward_kinematics(alpha, beta, 5.0, 8.0, DEFAULT_ORIGIN);
        let (a2, b2) = (
            (alpha + a[0]).clamp(0.0, 180.0),
            (beta + a[1]).clamp(0.0, 180.0),
        );
        let (end2, elbow2) = forward_kinematics(a2, b2, 5.0, 8.0, DEFAULT_ORIGIN);
        let target = Point::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
        Transition {
            s: [end.x, end.y, elbow.x, elbow.y, target.x, target.y],
            a,
            r: -end2.distance(target),
            s_next: [end2.x, end2.y, elbow2.x, elbow2.y, target.x, target.y],
            terminal: false,
        }
    }

    #[test]
    fn zero_forward_net_predicts_arena_centre() {
        let mut m = small();
        m.forward_net = Mlp::zeros(
            &[6, 10, 8, 4],
            &[
                Activation::Sigmoid,
                Activation::Sigmoid,
                Activation::Sigmoid,
            ],
            30.0,
        )
        .unwrap();
        let (end, elbow) =
            m.predict_next(Point::new(3.0, 4.0), Point::new(1.0, 2.0), &[10.0, -5.0]);
        assert_eq!(
            (end, elbow),
            (Point::new(15.0, 15.0), Point::new(15.0, 15.0))
        );
    }

    #[test]
    fn outputs_stay_in_range() {
        let m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s: StateVector = std::array::from_fn(|_| rng.random_range(-100.0..100.0));
            let a = m.plan_action(&s);
            assert!(a.iter().all(|v| v.abs() <= 180.0));
            assert_eq!(a, m.plan_action(&s));
            let (end, elbow) = m.predict_next(Point::new(s[0], s[1]), Point::new(s[2], s[3]), &a);
            for v in [end.x, end.y, elbow.x, elbow.y] {
                assert!((0.0..=30.0).contains(&v));
            }
        }
    }

    #[test]
    fn inverse_inputs_use_achieved_position() {
        let m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_transition(&mut rng);
        let (x, y) = m.inverse_training_pairs(&[t]);
        assert!((x[[0, 4]] * 30.0 - t.s_next[0]).abs() < 1e-12);
        assert!((x[[0, 5]] * 30.0 - t.s_next[1]).abs() < 1e-12);
        assert!((x[[0, 4]] * 30.0 - t.s[4]).abs() > 1e-9 || t.s[4] == t.s_next[0]);
        assert_eq!((y[[0, 0]], y[[0, 1]]), (t.a[0], t.a[1]));
    }

    #[test]
    fn losses_match_external_recomputation() {
        let mut m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch: Vec<Transition> = (0..20).map(|_| random_transition(&mut rng)).collect();

        let fwd_expected: f64 = batch
            .iter()
            .map(|t| {
                let (e, l) =
                    m.predict_next(Point::new(t.s[0], t.s[1]), Point::new(t.s[2], t.s[3]), &t.a);
                (e.x - t.s_next[0]).powi(2)
                    + (e.y - t.s_next[1]).powi(2)
                    + (l.x - t.s_next[2]).powi(2)
                    + (l.y - t.s_next[3]).powi(2)
            })
            .sum::<f64>()
            / 20.0;
        let inv_expected: f64 = batch
            .iter()
            .map(|t| {
                let mut probe = t.s;
                probe[4] = t.s_next[0];
                probe[5] = t.s_next[1];
                let a = m.plan_action(&probe);
                (a[0] - t.a[0]).powi(2) + (a[1] - t.a[1]).powi(2)
            })
            .sum::<f64>()
            / 20.0;
        let fwd = m.train_forward(&batch).unwrap();
        let inv = m.train_inverse(&batch).unwrap();
        assert!((fwd - fwd_expected).abs() < 1e-9 * fwd_expected.max(1.0));
        assert!((inv - inv_expected).abs() < 1e-9 * inv_expected.max(1.0));
    }

    #[test]
    fn forward_loss_decreases_on_fixed_batch() {
        let mut m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch: Vec<Transition> = (0..64).map(|_| random_transition(&mut rng)).collect();
        let first = m.train_forward(&batch).unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = m.train_forward(&batch).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn inverse_memorizes_repeated_pair() {
        let mut m = small();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_transition(&mut rng);
        let batch = vec![t; 8];
        let first = m.train_inverse(&batch).unwrap();
        let mut last = first;
        for _ in 0..500 {
            last = m.train_inverse(&batch).unwrap();
        }
        assert!(last < 1e-2 * first && last < 1.0, "{first} -> {last}");
    }

    #[test]
    fn empty_batches_are_rejected() {
        let mut m = small();
        assert!(m.train_forward(&[]).is_err());
        assert!(m.train_inverse(&[]).is_err());
    }
}
