//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Environment:
//! - `APAC_ACCEPTANCE_SEEDS`  seeds per cell (default 5)
//! - `APAC_ACCEPTANCE_CONFIG` TOML file overriding the base configuration
//! - `APAC_ACCEPTANCE_JOBS`   parallel runs (default 1)
//! - `APAC_ACCEPTANCE_STRICT` exit non-zero when a criterion fails
//! - `APAC_ACCEPTANCE_QUICK`  only the property criteria 1-4

mod common;

use std::collections::HashMap;
use std::time::Instant;

use apac_core::arbitrator::{ArbitratorConfig, Source};
use apac_core::env::{
    reward, ControllerMode, KinematicsMode, Point, TargetMode, TargetRegion, VisionMode,
};
use apac_core::habitual::{action_matrix, state_matrix, ActorCritic, HabitualConfig};
use apac_core::harness::{
    agent_hash, evaluate, generalization_experiment, habitual_fraction, load_checkpoint,
    mean_time_cost, moving_average, parallel_map, records_to_string, save_checkpoint,
    success_series, test_targets, train_run, EpisodeRecord, ExperimentConfig, TestSummary,
    TrainedRun, SMOOTHING_WINDOW,
};
use apac_core::nn::{Activation, Mlp};
use apac_core::replay::{ReplayBuffer, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ControllerMode::{Apac, Ddpg, Spac};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

struct Verdict {
    pass: bool,
}

fn verdict(id: usize, pass: bool, detail: impl AsRef<str>) -> Verdict {
    println!(
        "criterion {id:>2}: {}  {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    Verdict { pass }
}

fn env_usize(name: &str, default: usize) -> usize {
    std::env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

// ---------------------------------------------------------------- 1 to 4

fn kinematics() -> Verdict {
    let err = common::kinematics_max_error(1000, 11);
    verdict(
        1,
        err < 1e-9,
        format!("max abs error {err:.2e} over 1000 poses"),
    )
}

fn gradients() -> Verdict {
    let suite = common::gradient_suite();
    let worst = suite.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let parts: Vec<String> = suite.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    verdict(
        2,
        worst < 1e-4,
        format!("max relative error: {}", parts.join(", ")),
    )
}

fn soft_update_exact() -> bool {
    let dims = [3, 4, 2];
    let acts = [Activation::Relu, Activation::Tanh];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let main = Mlp::new(&dims, &acts, 1.0, &mut rng).unwrap();
    let mut target = Mlp::new(&dims, &acts, 1.0, &mut rng).unwrap();
    let tau = 0.001;
    let expected: Vec<f64> = main
        .parameters()
        .iter()
        .zip(target.parameters())
        .map(|(m, t)| t * (1.0 - tau) + m * tau)
        .collect();
    target.soft_update_from(&main, tau).unwrap();
    target.parameters() == expected
}

fn fifo_exact() -> bool {
    let tr = |i: usize| Transition {
        s: [i as f64; 6],
        a: [0.0; 2],
        r: -(i as f64),
        s_next: [0.0; 6],
        terminal: false,
    };
    let mut buf = ReplayBuffer::new(4);
    (0..10).for_each(|i| buf.push(tr(i)));
    let kept: Vec<f64> = buf.iter().map(|t| -t.r).collect();
    buf.len() == 4 && kept == vec![6.0, 7.0, 8.0, 9.0]
}

fn td_targets_exact() -> bool {
    let cfg = HabitualConfig {
        hidden: [8, 6],
        ..HabitualConfig::default()
    };
    let ac = ActorCritic::new(cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let batch = common::random_batch(3, 12);
    let y = ac.td_targets(&batch);
    batch.iter().zip(y.iter()).all(|(t, &y)| {
        if t.terminal {
            return y == t.r;
        }
        let next = state_matrix(std::iter::once(t.s_next), &ac.cfg.scaling);
        let a = ac
            .actor_target
            .forward(next.row(0).as_slice().unwrap())
            .unwrap();
        let a = action_matrix(std::iter::once([a[0], a[1]]), &ac.cfg.scaling);
        let q = ac.critic_target.q_values(next.view(), a.view()).unwrap()[0];
        y == t.r + ac.cfg.gamma * q
    })
}

fn reward_exact() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..1000).all(|_| {
        let p = Point::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
        let q = Point::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
        let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
        (reward(p, q) + d).abs() <= 1e-12 * d.max(1.0) && reward(p, p) == 0.0
    })
}

fn arbitrator_exact() -> bool {
    use Source::{Habitual as H, Planning as P};
    let apac = ArbitratorConfig::new(Apac);
    let table: [(usize, Option<f64>, Source); 10] = [
        (0, None, H),
        (1, Some(50.0), H),
        (2, Some(0.3), H),
        (2, Some(-0.99), H),
        (2, Some(1.0), P),
        (3, Some(-1.0), P),
        (5, Some(7.5), P),
        (5, None, P),
        (5, Some(f64::NAN), P),
        (29, Some(0.0), H),
    ];
    let apac_ok = table
        .iter()
        .all(|&(step, rpe, want)| apac.source_for(step, rpe) == want);
    let fixed_ok = (0..30).all(|step| {
        [None, Some(0.0), Some(10.0)].iter().all(|&rpe| {
            ArbitratorConfig::new(Ddpg).source_for(step, rpe) == H
                && ArbitratorConfig::new(Spac).source_for(step, rpe) == P
        })
    });
    apac_ok && fixed_ok
}

fn tiny_config(model: ControllerMode) -> ExperimentConfig {
    ExperimentConfig {
        model,
        hidden: [8, 6],
        episodes: 12,
        babbling_episodes: 4,
        replay_capacity: 64,
        batch_size: 16,
        seeds: vec![0],
        ..ExperimentConfig::default()
    }
}

fn checkpoint_exact() -> bool {
    [Ddpg, Spac, Apac].iter().all(|&model| {
        let cfg = tiny_config(model);
        let trained = train_run(&cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &trained.frozen, &cfg).unwrap();
        let (loaded, loaded_cfg) = load_checkpoint(dir.path()).unwrap();
        let (a, b) = (&loaded.agent, &trained.frozen.agent);
        let same_net = |x: &Mlp, y: &Mlp| {
            x.parameters() == y.parameters()
                && x.layer_dims() == y.layer_dims()
                && x.activations() == y.activations()
                && x.output_scale() == y.output_scale()
        };
        let (h, g) = (&a.habitual, &b.habitual);
        let habitual = same_net(&h.actor, &g.actor)
            && same_net(&h.actor_target, &g.actor_target)
            && h.critic.parameters() == g.critic.parameters()
            && h.critic_target.parameters() == g.critic_target.parameters();
        let models = match (&a.models, &b.models) {
            (Some(x), Some(y)) => {
                same_net(&x.forward_net, &y.forward_net) && same_net(&x.inverse_net, &y.inverse_net)
            }
            (None, None) => true,
            _ => false,
        };
        habitual
            && models
            && a.arbitrator == b.arbitrator
            && loaded.arm == trained.frozen.arm
            && loaded.training_target == trained.frozen.training_target
            && loaded.seed == trained.frozen.seed
            && loaded_cfg == cfg
            && agent_hash(a) == agent_hash(b)
    })
}

fn exact_properties() -> Verdict {
    let checks = [
        ("soft update", soft_update_exact()),
        ("fifo eviction", fifo_exact()),
        ("td targets", td_targets_exact()),
        ("reward", reward_exact()),
        ("arbitrator", arbitrator_exact()),
        ("checkpoint", checkpoint_exact()),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let detail = if failed.is_empty() {
        "soft update, fifo eviction, td targets, reward, arbitrator, checkpoint".to_string()
    } else {
        format!("failed: {}", failed.join(", "))
    };
    verdict(3, failed.is_empty(), detail)
}

fn determinism() -> Verdict {
    let csv = |model, seed| {
        records_to_string(&train_run(&tiny_config(model), seed).unwrap().records).unwrap()
    };
    let same = [Ddpg, Spac, Apac].iter().all(|&m| csv(m, 3) == csv(m, 3));
    let differs = csv(Apac, 3) != csv(Apac, 4);
    verdict(
        4,
        same && differs,
        format!("identical CSV on rerun: {same}, other seed differs: {differs}"),
    )
}

// ---------------------------------------------------------------- 5 to 11

/// Trained runs keyed by configuration, so criteria share them.
struct Lab {
    base: ExperimentConfig,
    runs: HashMap<String, Vec<TrainedRun>>,
}

impl Lab {
    fn config(
        &self,
        model: ControllerMode,
        target: TargetMode,
        kinematics: KinematicsMode,
    ) -> ExperimentConfig {
        ExperimentConfig {
            model,
            target,
            kinematics,
            vision: VisionMode::Perfect,
            ..self.base.clone()
        }
    }

    /// Vision only matters at test time, so every vision mode shares the
    /// runs trained with perfect vision.
    fn runs(&mut self, cfg: &ExperimentConfig) -> &[TrainedRun] {
        let key = cfg.to_toml_string().unwrap();
        if !self.runs.contains_key(&key) {
            let started = Instant::now();
            let runs = parallel_map(cfg.jobs, &cfg.seeds, |&seed| train_run(cfg, seed)).unwrap();
            eprintln!(
                "  trained {} {} x{} in {:.0}s",
                cfg.condition().unwrap().id(),
                cfg.model,
                cfg.seeds.len(),
                started.elapsed().as_secs_f64()
            );
            self.runs.insert(key.clone(), runs);
        }
        &self.runs[&key]
    }

    fn test(&mut self, cfg: &ExperimentConfig, vision: VisionMode) -> Vec<Vec<EpisodeRecord>> {
        let runs = self.runs(cfg).to_vec();
        runs.iter()
            .map(|r| {
                let targets = test_targets(&r.frozen, cfg, cfg.train_region).unwrap();
                evaluate(&r.frozen, cfg, &targets, vision).unwrap()
            })
            .collect()
    }
}

fn seed_mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn success_rate(per_seed: &[Vec<EpisodeRecord>]) -> f64 {
    seed_mean(
        per_seed
            .iter()
            .map(|r| TestSummary::from_records(r).success_rate),
    )
}

fn static_targets(lab: &mut Lab) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for model in [Ddpg, Spac, Apac] {
        let cfg = lab.config(model, TargetMode::Static, KinematicsMode::Static);
        let s = success_rate(&lab.test(&cfg, VisionMode::Perfect));
        pass &= s >= 0.95;
        parts.push(format!("{model} {s:.2}"));
    }
    verdict(
        5,
        pass,
        format!("test success on the training target: {}", parts.join(", ")),
    )
}

fn changing_targets(lab: &mut Lab) -> Verdict {
    let mut rate = HashMap::new();
    for model in [Ddpg, Spac, Apac] {
        let cfg = lab.config(model, TargetMode::Changing, KinematicsMode::Static);
        rate.insert(model, success_rate(&lab.test(&cfg, VisionMode::Perfect)));
    }
    let (d, s, a) = (rate[&Ddpg], rate[&Spac], rate[&Apac]);
    let pass = d <= 0.85 && d <= s - 0.10 && d <= a - 0.10 && s >= 0.90 && a >= 0.90;
    verdict(
        6,
        pass,
        format!("grid test success: ddpg {d:.2}, spac {s:.2}, apac {a:.2}"),
    )
}

fn arbitration_shift(lab: &mut Lab) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for target in [TargetMode::Static, TargetMode::Changing] {
        for kinematics in [KinematicsMode::Static, KinematicsMode::Changing] {
            let cfg = lab.config(Apac, target, kinematics);
            let f = seed_mean(
                lab.runs(&cfg)
                    .iter()
                    .map(|r| habitual_fraction(&r.records, 300..1000).unwrap_or(0.0)),
            );
            pass &= f >= 0.70;
            for vision in [VisionMode::Perfect, VisionMode::Occluded] {
                let id = ExperimentConfig {
                    vision,
                    ..cfg.clone()
                }
                .condition()
                .unwrap()
                .id();
                parts.push(format!("{id} {f:.2}"));
            }
        }
    }
    verdict(
        7,
        pass,
        format!(
            "apac habitual share, episodes 300-1000: {}",
            parts.join(", ")
        ),
    )
}

/// Post-babbling episodes until the seed-averaged moving-average training
/// success first reaches `level` over a full window.
fn episodes_to_level(runs: &[TrainedRun], babble: usize, level: f64) -> Option<usize> {
    let curves: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| moving_average(&success_series(&r.records[babble..]), SMOOTHING_WINDOW))
        .collect();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (SMOOTHING_WINDOW - 1..len)
        .find(|&i| seed_mean(curves.iter().map(|c| c[i])) >= level)
        .map(|i| i + 1)
}

fn learning_speed(lab: &mut Lab) -> Verdict {
    let babble = lab.base.babbling_episodes;
    let mut parts = Vec::new();
    let mut pass = true;
    for model in [Spac, Apac] {
        let cfg = lab.config(model, TargetMode::Changing, KinematicsMode::Static);
        let reached = episodes_to_level(lab.runs(&cfg), babble, 0.8);
        pass &= reached.is_some_and(|n| n <= 200);
        parts.push(match reached {
            Some(n) => format!("{model} after {n}"),
            None => format!("{model} never"),
        });
    }
    verdict(
        8,
        pass,
        format!(
            "post-babbling episodes to 80% moving-average success: {}",
            parts.join(", ")
        ),
    )
}

fn time_cost(lab: &mut Lab) -> Verdict {
    let babble = lab.base.babbling_episodes;
    let episodes = lab.base.episodes;
    let mut cost = HashMap::new();
    for model in [Spac, Apac] {
        let cfg = lab.config(model, TargetMode::Changing, KinematicsMode::Static);
        let c = seed_mean(
            lab.runs(&cfg)
                .iter()
                .map(|r| mean_time_cost(&r.records, babble..episodes).unwrap_or(f64::INFINITY)),
        );
        cost.insert(model, c);
    }
    let (s, a) = (cost[&Spac], cost[&Apac]);
    verdict(
        9,
        a < s,
        format!("mean training time cost: apac {a:.2}, spac {s:.2}"),
    )
}

fn occluded(lab: &mut Lab) -> Verdict {
    let mut dist = HashMap::new();
    for model in [Spac, Apac] {
        let cfg = lab.config(model, TargetMode::Changing, KinematicsMode::Static);
        let per_seed = lab.test(&cfg, VisionMode::Occluded);
        dist.insert(
            model,
            seed_mean(
                per_seed
                    .iter()
                    .map(|r| TestSummary::from_records(r).mean_final_distance),
            ),
        );
    }
    let (s, a) = (dist[&Spac], dist[&Apac]);
    verdict(
        10,
        s <= a && s < 1.0,
        format!("occluded mean final distance: spac {s:.2} cm, apac {a:.2} cm"),
    )
}

fn generalization(base: &ExperimentConfig) -> Verdict {
    let started = Instant::now();
    let (rows, _) = generalization_experiment(base, &[Ddpg, Spac, Apac]).unwrap();
    eprintln!(
        "  generalization runs in {:.0}s",
        started.elapsed().as_secs_f64()
    );
    let rate = |m, t| {
        rows.iter()
            .find(|r| r.model == m && r.target == t)
            .unwrap()
            .success_rate
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for m in [Ddpg, Spac, Apac] {
        let (s, c) = (rate(m, TargetMode::Static), rate(m, TargetMode::Changing));
        pass &= s < 0.5 && c > s;
        parts.push(format!("{m} static {s:.2} / changing {c:.2}"));
    }
    verdict(11, pass, format!("held-out success: {}", parts.join(", ")))
}

fn main() {
    let mut verdicts = vec![kinematics(), gradients(), exact_properties(), determinism()];
    if std::env::var_os("APAC_ACCEPTANCE_QUICK").is_none() {
        let mut base = match std::env::var("APAC_ACCEPTANCE_CONFIG") {
            Ok(path) => ExperimentConfig::from_file(path.as_ref()).unwrap(),
            Err(_) => ExperimentConfig::desk(),
        };
        base.seeds = (0..env_usize("APAC_ACCEPTANCE_SEEDS", 5) as u64).collect();
        base.jobs = env_usize("APAC_ACCEPTANCE_JOBS", base.jobs);
        base.train_region = TargetRegion::Full;
        eprintln!(
            "acceptance runs: {} seeds, {} episodes, hidden {:?}",
            base.seeds.len(),
            base.episodes,
            base.hidden
        );
        let mut lab = Lab {
            base: base.clone(),
            runs: HashMap::new(),
        };
        verdicts.push(static_targets(&mut lab));
        verdicts.push(changing_targets(&mut lab));
        verdicts.push(arbitration_shift(&mut lab));
        verdicts.push(learning_speed(&mut lab));
        verdicts.push(time_cost(&mut lab));
        verdicts.push(occluded(&mut lab));
        drop(lab);
        verdicts.push(generalization(&base));
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("acceptance: {passed}/{} criteria passed", verdicts.len());
    if passed < verdicts.len() && std::env::var_os("APAC_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
