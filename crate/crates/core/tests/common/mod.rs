#![allow(dead_code)]

use apac_core::env::{forward_kinematics, Point};
use apac_core::habitual::{action_matrix, state_matrix, ActorCritic, HabitualConfig};
use apac_core::nn::Mlp;
use apac_core::planning::{InternalModels, PlanningConfig};
use apac_core::replay::Transition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const WIDTH: [usize; 2] = [8, 6];

/// Elementwise relative error. Entries far below the largest gradient
/// component are compared against that scale instead, since finite
/// differences cannot resolve them relative to their own size.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let floor = (scale * 1e-3).max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn central_difference(p: &mut [f64], i: usize, h: f64, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = p[i];
    p[i] = orig + h;
    let up = f(p);
    p[i] = orig - h;
    let down = f(p);
    p[i] = orig;
    (up - down) / (2.0 * h)
}

/// Central differences of `f` around `params`. A relu kink inside the
/// stencil makes the estimate depend on the step; such entries are
/// re-estimated with a step too small to reach the kink.
pub fn numeric_gradient(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let g = central_difference(&mut p, i, FD_STEP, &mut f);
            let fine = central_difference(&mut p, i, FD_STEP / 100.0, &mut f);
            if (g - fine).abs() > 1e-2 * g.abs().max(fine.abs()).max(1e-6) {
                fine
            } else {
                g
            }
        })
        .collect()
}

pub fn random_batch(seed: u64, n: usize) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut s = [0.0; 6];
            let mut s_next = [0.0; 6];
            for v in s.iter_mut().chain(s_next.iter_mut()) {
                *v = rng.random_range(2.0..28.0);
            }
            Transition {
                s,
                a: [
                    rng.random_range(-180.0..180.0),
                    rng.random_range(-180.0..180.0),
                ],
                r: -rng.random_range(0.0..5.0),
                s_next,
                terminal: i % 4 == 0,
            }
        })
        .collect()
}

fn mlp_mse_check(net: &Mlp, x: &ndarray::Array2<f64>, y: &ndarray::Array2<f64>) -> f64 {
    let (_, grads, _) = net.mse_gradients(x.view(), y.view()).unwrap();
    let mut probe = net.clone();
    let numeric = numeric_gradient(&net.parameters(), |p| {
        probe.set_parameters(p).unwrap();
        probe.mse_gradients(x.view(), y.view()).unwrap().0
    });
    max_relative_error(&grads.flatten(), &numeric)
}

pub fn forward_model_error(seed: u64) -> f64 {
    let cfg = PlanningConfig {
        hidden: WIDTH,
        ..PlanningConfig::default()
    };
    let models = InternalModels::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let (x, y) = models.forward_training_pairs(&random_batch(seed + 100, 7));
    mlp_mse_check(&models.forward_net, &x, &y)
}

pub fn inverse_model_error(seed: u64) -> f64 {
    let cfg = PlanningConfig {
        hidden: WIDTH,
        ..PlanningConfig::default()
    };
    let models = InternalModels::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let (x, y) = models.inverse_training_pairs(&random_batch(seed + 100, 7));
    mlp_mse_check(&models.inverse_net, &x, &y)
}

fn actor_critic(seed: u64) -> ActorCritic {
    let cfg = HabitualConfig {
        hidden: WIDTH,
        ..HabitualConfig::default()
    };
    ActorCritic::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Critic parameter gradient of the squared TD error.
pub fn critic_error(seed: u64) -> f64 {
    let ac = actor_critic(seed);
    let batch = random_batch(seed + 100, 7);
    let y = ac.td_targets(&batch);
    let scaling = ac.cfg.scaling;
    let s = state_matrix(batch.iter().map(|t| t.s), &scaling);
    let a = action_matrix(batch.iter().map(|t| t.a), &scaling);
    let (_, grads) = ac.critic.mse_gradients(s.view(), a.view(), &y).unwrap();
    let mut probe = ac.critic.clone();
    let numeric = numeric_gradient(&ac.critic.parameters(), |p| {
        probe.set_parameters(p).unwrap();
        probe.mse_gradients(s.view(), a.view(), &y).unwrap().0
    });
    max_relative_error(&grads.flatten(), &numeric)
}

/// Actor gradient of the mean critic value, which runs through the critic's
/// action input.
pub fn actor_error(seed: u64) -> f64 {
    let ac = actor_critic(seed);
    let batch = random_batch(seed + 100, 7);
    let (_, grads) = ac.actor_objective_gradient(&batch).unwrap();
    let mut probe = ac.clone();
    let numeric = numeric_gradient(&ac.actor.parameters(), |p| {
        probe.actor.set_parameters(p).unwrap();
        probe.actor_objective_gradient(&batch).unwrap().0
    });
    max_relative_error(&grads.flatten(), &numeric)
}

/// Worst error over all four architectures and a few seeds.
pub fn gradient_suite() -> Vec<(&'static str, f64)> {
    let checks: [(&str, fn(u64) -> f64); 4] = [
        ("actor", actor_error),
        ("critic", critic_error),
        ("forward", forward_model_error),
        ("inverse", inverse_model_error),
    ];
    checks
        .iter()
        .map(|(name, f)| (*name, (0..3).map(f).fold(0.0, f64::max)))
        .collect()
}

/// Independent planar two-link kinematics.
pub fn kinematics_oracle(alpha: f64, beta: f64, l1: f64, l2: f64, origin: Point) -> (Point, Point) {
    let a = alpha.to_radians();
    let b = beta.to_radians();
    let elbow = Point::new(origin.x + l1 * a.cos(), origin.y + l1 * a.sin());
    let end = Point::new(elbow.x + l2 * (a + b).cos(), elbow.y + l2 * (a + b).sin());
    (end, elbow)
}

/// Largest coordinate error over `n` random poses.
pub fn kinematics_max_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let alpha = rng.random_range(0.0..=180.0);
        let beta = rng.random_range(0.0..=180.0);
        let l1 = rng.random_range(1.0..10.0);
        let l2 = rng.random_range(1.0..10.0);
        let origin = Point::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
        let (end, elbow) = forward_kinematics(alpha, beta, l1, l2, origin);
        let (oe, ob) = kinematics_oracle(alpha, beta, l1, l2, origin);
        for d in [end.x - oe.x, end.y - oe.y, elbow.x - ob.x, elbow.y - ob.y] {
            worst = worst.max(d.abs());
        }
    }
    worst
}
