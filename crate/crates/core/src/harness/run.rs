use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{BabblePolicy, ExperimentConfig};
use super::metrics::{time_cost, EpisodeRecord};
use super::{HarnessError, Result};
use crate::arbitrator::{integrate, ArbitratorConfig, Source};
use crate::env::{
    sample_target, Action, ArmState, Observation, Point, ReachingEnv, StateVector, StepOutcome,
    TargetMode, Termination, VisionMode, JOINT_MAX,
};
use crate::habitual::ActorCritic;
use crate::noise::OuProcess;
use crate::planning::InternalModels;
use crate::replay::{ReplayBuffer, Transition};

/// Both controllers plus the arbitration rule. DDPG agents carry no
/// internal models.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub habitual: ActorCritic,
    pub models: Option<InternalModels>,
    pub arbitrator: ArbitratorConfig,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Self> {
        let habitual = ActorCritic::new(cfg.habitual_config(), rng)?;
        let models = if cfg.uses_internal_models() {
            Some(InternalModels::new(cfg.planning_config(), rng)?)
        } else {
            None
        };
        Ok(Self {
            habitual,
            models,
            arbitrator: cfg.arbitrator_config(),
        })
    }

    fn models(&self) -> Result<&InternalModels> {
        self.models
            .as_ref()
            .ok_or_else(|| HarnessError::Config("this agent has no internal models".into()))
    }

    /// Noise-free proposal of the chosen controller.
    pub fn propose(&self, source: Source, s: &StateVector) -> Result<Action> {
        Ok(match source {
            Source::Habitual => self.habitual.act(s),
            Source::Planning => self.models()?.plan_action(s),
        })
    }

    /// Source for `step`, consulting the critic only when the rule needs it.
    pub fn choose_source(&self, step: usize, last: Option<&Transition>) -> Source {
        let rpe = if self.arbitrator.needs_rpe(step) {
            last.map(|t| self.habitual.rpe(t))
        } else {
            None
        };
        self.arbitrator.source_for(step, rpe)
    }
}

/// A trained agent with its networks frozen, plus what testing needs to
/// rebuild the plant.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenRun {
    pub seed: u64,
    pub agent: Agent,
    /// Arm at the end of training; segment lengths stay fixed from here on.
    pub arm: ArmState,
    /// The single training target of static-target runs.
    pub training_target: Option<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub frozen: FrozenRun,
    pub records: Vec<EpisodeRecord>,
}

pub fn clamp_action(a: Action) -> Action {
    a.map(|v| v.clamp(-JOINT_MAX, JOINT_MAX))
}

/// Independent random streams so that, for example, the babbling policy
/// does not shift the sequence of training targets.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Mutable state of one training run.
pub struct RunState {
    cfg: ExperimentConfig,
    seed: u64,
    condition_id: String,
    agent: Agent,
    env: ReachingEnv,
    buffer: ReplayBuffer,
    noise: OuProcess,
    static_target: Option<Point>,
    target_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    batch_rng: ChaCha8Rng,
    babble_rng: ChaCha8Rng,
    records: Vec<EpisodeRecord>,
    next_episode: usize,
}

impl RunState {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let condition = cfg.condition()?;
        let agent = Agent::new(cfg, &mut stream(seed, 0))?;
        let env = ReachingEnv::with_arm(
            ArmState::default(),
            cfg.kinematics,
            cfg.max_steps,
            cfg.target_radius,
        );
        let mut target_rng = stream(seed, 1);
        let static_target = (cfg.target == TargetMode::Static).then(|| {
            let arm = env.arm();
            sample_target(
                &mut target_rng,
                arm.l1,
                arm.l2,
                arm.origin,
                cfg.train_region,
            )
        });
        Ok(Self {
            condition_id: condition.id(),
            agent,
            env,
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            noise: OuProcess::from_config(&cfg.ou_config()),
            static_target,
            target_rng,
            noise_rng: stream(seed, 2),
            batch_rng: stream(seed, 3),
            babble_rng: stream(seed, 4),
            records: Vec::with_capacity(cfg.episodes),
            next_episode: 0,
            cfg: cfg.clone(),
            seed,
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    fn next_target(&mut self) -> Point {
        if let Some(t) = self.static_target {
            return t;
        }
        let arm = *self.env.arm();
        sample_target(
            &mut self.target_rng,
            arm.l1,
            arm.l2,
            arm.origin,
            self.cfg.train_region,
        )
    }

    /// One minibatch update of every network this mode trains, in the order
    /// forward, inverse, critic, actor, targets.
    fn learn(&mut self) -> Result<()> {
        let Some(batch) = self
            .buffer
            .sample_batch(self.cfg.batch_size, &mut self.batch_rng)
        else {
            return Ok(());
        };
        if let Some(models) = self.agent.models.as_mut() {
            models.train_forward(&batch)?;
            models.train_inverse(&batch)?;
        }
        if self.cfg.trains_habitual() {
            let ac = &mut self.agent.habitual;
            ac.train_critic(&batch)?;
            ac.train_actor(&batch)?;
            ac.update_targets()?;
        }
        Ok(())
    }

    fn record(
        &self,
        episode: usize,
        success: bool,
        steps: usize,
        hab: usize,
        plan: usize,
    ) -> EpisodeRecord {
        EpisodeRecord {
            seed: self.seed,
            condition: self.condition_id.clone(),
            model: self.cfg.model,
            episode,
            success,
            steps,
            habitual_steps: hab,
            planning_steps: plan,
            time_cost: time_cost(hab, plan, steps - hab - plan, self.cfg.planning_time_factor),
            final_distance: self.env.distance_to_target(),
        }
    }

    /// Steps the plant and returns the action to store with the transition.
    fn step(&mut self, a: Action) -> Result<(StepOutcome, Action)> {
        let before = *self.env.arm();
        let out = self.env.step(a)?;
        let after = self.env.arm();
        let stored = if self.cfg.store_executed_action {
            [after.alpha - before.alpha, after.beta - before.beta]
        } else {
            a
        };
        Ok((out, stored))
    }

    /// Motor babbling. Each achieved end position is stored as the target of
    /// its own transition, with the maximal reward 0 and a terminal flag.
    pub fn babble(&mut self, n_episodes: usize) -> Result<()> {
        for _ in 0..n_episodes {
            let episode = self.next_episode;
            let arm = *self.env.arm();
            let goal = sample_target(
                &mut self.babble_rng,
                arm.l1,
                arm.l2,
                arm.origin,
                self.cfg.train_region,
            );
            let mut obs = self
                .env
                .begin_episode(goal, episode, Termination::LimitOnly);
            self.noise.reset();
            let mut steps = 0;
            while !self.env.is_terminated() {
                let a = match self.cfg.babble_policy {
                    BabblePolicy::Random => [
                        self.babble_rng.random_range(-JOINT_MAX..=JOINT_MAX),
                        self.babble_rng.random_range(-JOINT_MAX..=JOINT_MAX),
                    ],
                    BabblePolicy::Inverse => {
                        let p = self.agent.propose(Source::Planning, &obs.state_vector())?;
                        let n = self.noise.next(&mut self.noise_rng);
                        clamp_action([p[0] + n[0], p[1] + n[1]])
                    }
                };
                let (out, a_stored) = self.step(a)?;
                let achieved = out.observation.end;
                let relabel = |o: &Observation| {
                    Observation {
                        target: achieved,
                        ..*o
                    }
                    .state_vector()
                };
                self.buffer.push(Transition {
                    s: relabel(&obs),
                    a: a_stored,
                    r: 0.0,
                    s_next: relabel(&out.observation),
                    terminal: true,
                });
                self.learn()?;
                obs = out.observation;
                steps += 1;
            }
            let rec = self.record(episode, false, steps, 0, 0);
            self.records.push(rec);
            self.next_episode += 1;
        }
        Ok(())
    }

    /// One training episode under arbitration with exploration noise.
    pub fn train_episode(&mut self) -> Result<()> {
        let episode = self.next_episode;
        let target = self.next_target();
        let mut obs = self
            .env
            .begin_episode(target, episode, Termination::ReachOrLimit);
        self.noise.reset();
        let (mut hab, mut plan, mut steps) = (0, 0, 0);
        let mut success = obs.end.distance(target) <= self.cfg.target_radius;
        let mut last: Option<Transition> = None;
        while !success && !self.env.is_terminated() {
            let s = integrate(
                VisionMode::Perfect,
                Some(&obs),
                obs.end,
                obs.elbow,
                Some(target),
            )?;
            let source = self.agent.choose_source(steps, last.as_ref());
            let p = self.agent.propose(source, &s)?;
            let mut n = self.noise.next(&mut self.noise_rng);
            if source == Source::Planning && !self.cfg.planning_noise {
                n = [0.0, 0.0];
            }
            let a = clamp_action([p[0] + n[0], p[1] + n[1]]);
            let (out, a_stored) = self.step(a)?;
            let t = Transition {
                s,
                a: a_stored,
                r: out.reward,
                s_next: out.observation.state_vector(),
                terminal: out.terminal,
            };
            self.buffer.push(t);
            self.learn()?;
            match source {
                Source::Habitual => hab += 1,
                Source::Planning => plan += 1,
            }
            steps += 1;
            success = out.reached;
            last = Some(t);
            obs = out.observation;
        }
        let rec = self.record(episode, success, steps, hab, plan);
        self.records.push(rec);
        self.next_episode += 1;
        Ok(())
    }

    pub fn finish(mut self) -> TrainedRun {
        self.env.freeze_kinematics();
        TrainedRun {
            frozen: FrozenRun {
                seed: self.seed,
                agent: self.agent,
                arm: *self.env.arm(),
                training_target: self.static_target,
            },
            records: self.records,
        }
    }
}

/// Babbling followed by arbitrated training episodes, one record each.
pub fn train_run(cfg: &ExperimentConfig, seed: u64) -> Result<TrainedRun> {
    let mut state = RunState::new(cfg, seed)?;
    state.babble(cfg.babbling_episodes)?;
    for _ in cfg.babbling_episodes..cfg.episodes {
        state.train_episode()?;
    }
    Ok(state.finish())
}

/// Test episodes with frozen networks and no exploration noise.
///
/// Under occluded vision the agent sees the arm and target only at step 0.
/// It then tracks its own forward-model predictions and stops when the
/// predicted end position enters the target zone; success and distance are
/// measured on the actual arm.
pub fn evaluate(
    frozen: &FrozenRun,
    cfg: &ExperimentConfig,
    targets: &[Point],
    vision: VisionMode,
) -> Result<Vec<EpisodeRecord>> {
    let condition = crate::env::Condition::new(cfg.target, cfg.kinematics, vision, cfg.model)?;
    let agent = &frozen.agent;
    let models = match vision {
        VisionMode::Occluded => Some(agent.models()?),
        VisionMode::Perfect => None,
    };
    let mut env =
        ReachingEnv::with_arm(frozen.arm, cfg.kinematics, cfg.max_steps, cfg.target_radius);
    env.freeze_kinematics();
    let radius = cfg.target_radius;
    let mut records = Vec::with_capacity(targets.len());
    for (i, &target) in targets.iter().enumerate() {
        let termination = match vision {
            VisionMode::Perfect => Termination::ReachOrLimit,
            VisionMode::Occluded => Termination::LimitOnly,
        };
        let mut obs = env.begin_episode(target, cfg.episodes + i, termination);
        let remembered = obs.target;
        let (mut est_end, mut est_elbow) = (obs.end, obs.elbow);
        let (mut hab, mut plan, mut steps) = (0, 0, 0);
        let mut done = est_end.distance(remembered) <= radius;
        let mut last: Option<Transition> = None;
        while !done {
            let visible = (vision == VisionMode::Perfect).then_some(&obs);
            let s = integrate(vision, visible, est_end, est_elbow, Some(remembered))?;
            let source = agent.choose_source(steps, last.as_ref());
            let a = clamp_action(agent.propose(source, &s)?);
            let predicted = models.map(|m| m.predict_next(est_end, est_elbow, &a));
            let out = env.step(a)?;
            steps += 1;
            match source {
                Source::Habitual => hab += 1,
                Source::Planning => plan += 1,
            }
            if let Some((pe, pl)) = predicted {
                est_end = pe;
                est_elbow = pl;
            } else {
                est_end = out.observation.end;
                est_elbow = out.observation.elbow;
            }
            let reached = est_end.distance(remembered) <= radius;
            done = reached || steps >= cfg.max_steps;
            last = Some(Transition {
                s,
                a,
                r: -est_end.distance(remembered),
                s_next: Observation {
                    end: est_end,
                    elbow: est_elbow,
                    target: remembered,
                }
                .state_vector(),
                terminal: done,
            });
            obs = out.observation;
        }
        let final_distance = env.distance_to_target();
        records.push(EpisodeRecord {
            seed: frozen.seed,
            condition: condition.id(),
            model: cfg.model,
            episode: i,
            success: final_distance <= radius,
            steps,
            habitual_steps: hab,
            planning_steps: plan,
            time_cost: time_cost(hab, plan, 0, cfg.planning_time_factor),
            final_distance,
        });
    }
    Ok(records)
}

/// Test targets for a run: the training target under static targets, the
/// angle grid restricted to `region` otherwise.
pub fn test_targets(
    frozen: &FrozenRun,
    cfg: &ExperimentConfig,
    region: crate::env::TargetRegion,
) -> Result<Vec<Point>> {
    if let Some(t) = frozen.training_target {
        if region == cfg.train_region {
            return Ok(vec![t]);
        }
    }
    let arm = frozen.arm;
    Ok(crate::env::test_target_grid_in(
        cfg.test_grid,
        arm.l1,
        arm.l2,
        arm.origin,
        region,
    )?)
}
