//! Two-joint planar arm in a 30 × 30 cm arena.
//!
//! Units are centimetres and degrees throughout. Actions are joint-angle
//! deltas; both joints are clamped to `[0, 180]` after every step.

use std::fmt;
use std::ops::{Add, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ARENA_SIZE: f64 = 30.0;
pub const DEFAULT_ORIGIN: Point = Point { x: 15.0, y: 15.0 };
pub const DEFAULT_L1: f64 = 5.0;
pub const DEFAULT_L2: f64 = 8.0;
pub const INITIAL_ALPHA: f64 = 0.0;
pub const INITIAL_BETA: f64 = 180.0;
pub const TARGET_RADIUS: f64 = 0.5;
pub const MAX_STEPS: usize = 30;
pub const JOINT_MIN: f64 = 0.0;
pub const JOINT_MAX: f64 = 180.0;
/// Segment growth per action step under changing kinematics.
pub const DRIFT_PER_STEP: f64 = 0.001;
/// Drift only applies in episodes numbered above this.
pub const DRIFT_START_EPISODE: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("step called on a terminated episode")]
    EpisodeTerminated,
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Joint deltas in degrees: `[Δα, Δβ]`.
pub type Action = [f64; 2];

/// `[end.x, end.y, elbow.x, elbow.y, target.x, target.y]`.
pub type StateVector = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub alpha: f64,
    pub beta: f64,
    pub l1: f64,
    pub l2: f64,
    pub origin: Point,
}

impl ArmState {
    pub fn initial(l1: f64, l2: f64, origin: Point) -> Self {
        Self {
            alpha: INITIAL_ALPHA,
            beta: INITIAL_BETA,
            l1,
            l2,
            origin,
        }
    }

    /// `(end, elbow)`.
    pub fn positions(&self) -> (Point, Point) {
        forward_kinematics(self.alpha, self.beta, self.l1, self.l2, self.origin)
    }
}

impl Default for ArmState {
    fn default() -> Self {
        Self::initial(DEFAULT_L1, DEFAULT_L2, DEFAULT_ORIGIN)
    }
}

/// Returns `(end, elbow)` for shoulder angle `alpha` and elbow angle `beta`.
pub fn forward_kinematics(
    alpha: f64,
    beta: f64,
    l1: f64,
    l2: f64,
    origin: Point,
) -> (Point, Point) {
    let a = alpha * std::f64::consts::PI / 180.0;
    let b = beta * std::f64::consts::PI / 180.0;
    let elbow_x = a.cos() * l1;
    let elbow_y = a.sin() * l1;
    let end_x = elbow_x + (b + a).cos() * l2;
    let end_y = elbow_y + (b + a).sin() * l2;
    (
        Point::new(end_x + origin.x, end_y + origin.y),
        Point::new(elbow_x + origin.x, elbow_y + origin.y),
    )
}

/// Negative Euclidean distance between end-effector and target.
pub fn reward(end: Point, target: Point) -> f64 {
    -end.distance(target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub end: Point,
    pub elbow: Point,
    pub target: Point,
}

impl Observation {
    pub fn state_vector(&self) -> StateVector {
        [
            self.end.x,
            self.end.y,
            self.elbow.x,
            self.elbow.y,
            self.target.x,
            self.target.y,
        ]
    }

    pub fn from_state_vector(s: &StateVector) -> Self {
        Self {
            end: Point::new(s[0], s[1]),
            elbow: Point::new(s[2], s[3]),
            target: Point::new(s[4], s[5]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Static,
    Changing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KinematicsMode {
    Static,
    Changing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisionMode {
    Perfect,
    Occluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    Ddpg,
    Spac,
    Apac,
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerMode::Ddpg => "ddpg",
            ControllerMode::Spac => "spac",
            ControllerMode::Apac => "apac",
        })
    }
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub target: TargetMode,
    pub kinematics: KinematicsMode,
    pub vision: VisionMode,
    pub controller: ControllerMode,
}

impl Condition {
    pub fn new(
        target: TargetMode,
        kinematics: KinematicsMode,
        vision: VisionMode,
        controller: ControllerMode,
    ) -> Result<Self, EnvError> {
        let c = Self {
            target,
            kinematics,
            vision,
            controller,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.controller == ControllerMode::Ddpg && self.vision == VisionMode::Occluded {
            return Err(EnvError::InvalidCondition(
                "the habitual-only controller needs vision throughout; occluded vision is not supported"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Short id such as `cs-perfect`: target letter, kinematics letter, vision.
    pub fn id(&self) -> String {
        let t = match self.target {
            TargetMode::Static => 's',
            TargetMode::Changing => 'c',
        };
        let k = match self.kinematics {
            KinematicsMode::Static => 's',
            KinematicsMode::Changing => 'c',
        };
        let v = match self.vision {
            VisionMode::Perfect => "perfect",
            VisionMode::Occluded => "occluded",
        };
        format!("{t}{k}-{v}")
    }
}

/// Angle-space regions targets can be drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRegion {
    Full,
    /// Shoulder angle in `[0, 120]`.
    TrainTwoThirds,
    /// Shoulder angle in `(120, 180]`.
    TestOneThird,
}

impl TargetRegion {
    pub const SPLIT_ALPHA: f64 = 120.0;

    pub fn contains_alpha(self, alpha: f64) -> bool {
        match self {
            TargetRegion::Full => (JOINT_MIN..=JOINT_MAX).contains(&alpha),
            TargetRegion::TrainTwoThirds => (JOINT_MIN..=Self::SPLIT_ALPHA).contains(&alpha),
            TargetRegion::TestOneThird => alpha > Self::SPLIT_ALPHA && alpha <= JOINT_MAX,
        }
    }
}

/// A sampled target together with the joint angles that generated it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledTarget {
    pub alpha: f64,
    pub beta: f64,
    pub point: Point,
}

pub fn sample_target_with_angles<R: Rng + ?Sized>(
    rng: &mut R,
    l1: f64,
    l2: f64,
    origin: Point,
    region: TargetRegion,
) -> SampledTarget {
    let alpha = match region {
        TargetRegion::Full => rng.random_range(JOINT_MIN..=JOINT_MAX),
        TargetRegion::TrainTwoThirds => rng.random_range(JOINT_MIN..=TargetRegion::SPLIT_ALPHA),
        TargetRegion::TestOneThird => {
            // maps [0, 1) onto (120, 180]
            let u: f64 = rng.random();
            TargetRegion::SPLIT_ALPHA + (JOINT_MAX - TargetRegion::SPLIT_ALPHA) * (1.0 - u)
        }
    };
    let beta = rng.random_range(JOINT_MIN..=JOINT_MAX);
    let (point, _) = forward_kinematics(alpha, beta, l1, l2, origin);
    SampledTarget { alpha, beta, point }
}

/// Draws a reachable target by sampling joint angles from `region`.
pub fn sample_target<R: Rng + ?Sized>(
    rng: &mut R,
    l1: f64,
    l2: f64,
    origin: Point,
    region: TargetRegion,
) -> Point {
    sample_target_with_angles(rng, l1, l2, origin, region).point
}

/// Evenly spaced `n × n` grid over `[0, 180]²` in `(alpha, beta)`, alpha-major.
pub fn grid_angles(n_per_axis: usize) -> Result<Vec<(f64, f64)>, EnvError> {
    if n_per_axis < 2 {
        return Err(EnvError::InvalidArgument(
            "test grid needs at least two points per axis".into(),
        ));
    }
    let step = (JOINT_MAX - JOINT_MIN) / (n_per_axis - 1) as f64;
    let axis: Vec<f64> = (0..n_per_axis)
        .map(|i| JOINT_MIN + step * i as f64)
        .collect();
    Ok(axis
        .iter()
        .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
        .collect())
}

pub fn test_target_grid(
    n_per_axis: usize,
    l1: f64,
    l2: f64,
    origin: Point,
) -> Result<Vec<Point>, EnvError> {
    Ok(grid_angles(n_per_axis)?
        .into_iter()
        .map(|(a, b)| forward_kinematics(a, b, l1, l2, origin).0)
        .collect())
}

/// Grid targets whose generating shoulder angle lies in `region`.
pub fn test_target_grid_in(
    n_per_axis: usize,
    l1: f64,
    l2: f64,
    origin: Point,
    region: TargetRegion,
) -> Result<Vec<Point>, EnvError> {
    Ok(grid_angles(n_per_axis)?
        .into_iter()
        .filter(|&(a, _)| region.contains_alpha(a))
        .map(|(a, b)| forward_kinematics(a, b, l1, l2, origin).0)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// End on entering the target zone or at the step limit.
    ReachOrLimit,
    /// End only at the step limit; used for babbling and for occluded
    /// episodes where the agent decides when to stop.
    LimitOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    /// End-effector is inside the target zone after this step.
    pub reached: bool,
}

/// The arm plant plus episode bookkeeping.
#[derive(Debug, Clone)]
pub struct ReachingEnv {
    arm: ArmState,
    kinematics: KinematicsMode,
    target: Point,
    episode_index: usize,
    steps_taken: usize,
    max_steps: usize,
    target_radius: f64,
    termination: Termination,
    terminated: bool,
    drift_frozen: bool,
}

impl ReachingEnv {
    pub fn new(kinematics: KinematicsMode) -> Self {
        Self::with_arm(ArmState::default(), kinematics, MAX_STEPS, TARGET_RADIUS)
    }

    pub fn with_arm(
        arm: ArmState,
        kinematics: KinematicsMode,
        max_steps: usize,
        target_radius: f64,
    ) -> Self {
        Self {
            arm,
            kinematics,
            target: arm.positions().0,
            episode_index: 0,
            steps_taken: 0,
            max_steps,
            target_radius,
            termination: Termination::ReachOrLimit,
            terminated: true,
            drift_frozen: false,
        }
    }

    pub fn arm(&self) -> &ArmState {
        &self.arm
    }

    pub fn target(&self) -> Point {
        self.target
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Stops segment growth, e.g. once training ends.
    pub fn freeze_kinematics(&mut self) {
        self.drift_frozen = true;
    }

    /// Resets the pose to the initial configuration; segment lengths carry over.
    pub fn begin_episode(
        &mut self,
        target: Point,
        episode_index: usize,
        termination: Termination,
    ) -> Observation {
        self.arm.alpha = INITIAL_ALPHA;
        self.arm.beta = INITIAL_BETA;
        self.target = target;
        self.episode_index = episode_index;
        self.steps_taken = 0;
        self.termination = termination;
        self.terminated = false;
        self.observe()
    }

    pub fn observe(&self) -> Observation {
        let (end, elbow) = self.arm.positions();
        Observation {
            end,
            elbow,
            target: self.target,
        }
    }

    pub fn distance_to_target(&self) -> f64 {
        self.arm.positions().0.distance(self.target)
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        if self.terminated {
            return Err(EnvError::EpisodeTerminated);
        }
        self.arm.alpha = (self.arm.alpha + action[0]).clamp(JOINT_MIN, JOINT_MAX);
        self.arm.beta = (self.arm.beta + action[1]).clamp(JOINT_MIN, JOINT_MAX);
        if self.kinematics == KinematicsMode::Changing
            && self.episode_index > DRIFT_START_EPISODE
            && !self.drift_frozen
        {
            self.arm.l1 += DRIFT_PER_STEP;
            self.arm.l2 += DRIFT_PER_STEP;
        }
        self.steps_taken += 1;
        let observation = self.observe();
        let distance = observation.end.distance(self.target);
        let reached = distance <= self.target_radius;
        let terminal = self.steps_taken >= self.max_steps
            || (reached && self.termination == Termination::ReachOrLimit);
        self.terminated = terminal;
        Ok(StepOutcome {
            observation,
            reward: -distance,
            terminal,
            reached,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol
    }

    #[test]
    fn kinematics_examples() {
        let (end, elbow) = forward_kinematics(0.0, 180.0, 5.0, 8.0, DEFAULT_ORIGIN);
        assert!(close(elbow, Point::new(20.0, 15.0), 1e-12));
        assert!(close(end, Point::new(12.0, 15.0), 1e-12));

        let (end, elbow) = forward_kinematics(90.0, 0.0, 5.0, 8.0, DEFAULT_ORIGIN);
        assert!(close(elbow, Point::new(15.0, 20.0), 1e-12));
        assert!(close(end, Point::new(15.0, 28.0), 1e-12));

        // elbow = 15 + 5/√2; end = elbow + 8·(cos 135°, sin 135°)
        let (end, elbow) = forward_kinematics(45.0, 90.0, 5.0, 8.0, DEFAULT_ORIGIN);
        assert!(close(
            elbow,
            Point::new(18.535_533_905_9, 18.535_533_905_9),
            1e-9
        ));
        assert!(close(
            end,
            Point::new(12.878_679_656_4, 24.192_388_155_4),
            1e-9
        ));
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(Point::new(12.0, 15.0), Point::new(15.0, 15.0)), -3.0);
        assert_eq!(reward(Point::new(4.0, 4.0), Point::new(4.0, 4.0)), 0.0);
        assert_eq!(reward(Point::new(12.0, 11.0), Point::new(15.0, 15.0)), -5.0);
    }

    #[test]
    fn step_from_initial_pose_inside_zone_terminates() {
        let mut env = ReachingEnv::new(KinematicsMode::Static);
        env.begin_episode(Point::new(12.0, 15.0), 1, Termination::ReachOrLimit);
        let out = env.step([0.0, 0.0]).unwrap();
        assert!(out.terminal && out.reached);
        assert!(out.reward.abs() < 1e-12);
        assert_eq!(env.step([0.0, 0.0]), Err(EnvError::EpisodeTerminated));
    }

    #[test]
    fn joints_are_clamped() {
        let mut env = ReachingEnv::new(KinematicsMode::Static);
        env.begin_episode(Point::new(0.0, 0.0), 1, Termination::ReachOrLimit);
        env.step([170.0, 30.0]).unwrap();
        assert_eq!(env.arm().alpha, 170.0);
        assert_eq!(env.arm().beta, 180.0);
        env.step([30.0, -400.0]).unwrap();
        assert_eq!(env.arm().alpha, 180.0);
        assert_eq!(env.arm().beta, 0.0);
    }

    #[test]
    fn kinematic_drift_after_episode_100() {
        let mut env = ReachingEnv::new(KinematicsMode::Changing);
        env.begin_episode(Point::new(0.0, 0.0), 100, Termination::ReachOrLimit);
        for _ in 0..10 {
            env.step([1.0, 0.0]).unwrap();
        }
        assert_eq!(env.arm().l1, 5.0);
        env.begin_episode(Point::new(0.0, 0.0), 101, Termination::ReachOrLimit);
        for _ in 0..10 {
            env.step([1.0, 0.0]).unwrap();
        }
        assert!((env.arm().l1 - 5.01).abs() < 1e-12);
        assert!((env.arm().l2 - 8.01).abs() < 1e-12);
        env.freeze_kinematics();
        env.begin_episode(Point::new(0.0, 0.0), 102, Termination::ReachOrLimit);
        env.step([1.0, 0.0]).unwrap();
        assert!((env.arm().l1 - 5.01).abs() < 1e-12);
    }

    #[test]
    fn static_kinematics_never_drift() {
        let mut env = ReachingEnv::new(KinematicsMode::Static);
        for ep in 1..=300 {
            env.begin_episode(Point::new(0.0, 0.0), ep, Termination::ReachOrLimit);
            while !env.step([3.0, -2.0]).unwrap().terminal {}
        }
        assert_eq!(env.arm().l1, DEFAULT_L1);
        assert_eq!(env.arm().l2, DEFAULT_L2);
    }

    #[test]
    fn episode_ends_at_step_limit() {
        let mut env = ReachingEnv::new(KinematicsMode::Static);
        env.begin_episode(Point::new(0.0, 0.0), 1, Termination::ReachOrLimit);
        let mut steps = 0;
        loop {
            steps += 1;
            if env.step([0.0, 0.0]).unwrap().terminal {
                break;
            }
        }
        assert_eq!(steps, MAX_STEPS);
    }

    #[test]
    fn limit_only_episodes_pass_through_the_zone() {
        let mut env = ReachingEnv::new(KinematicsMode::Static);
        env.begin_episode(Point::new(12.0, 15.0), 1, Termination::LimitOnly);
        let out = env.step([0.0, 0.0]).unwrap();
        assert!(out.reached && !out.terminal);
    }

    #[test]
    fn grid_corners_and_size() {
        let angles = grid_angles(2).unwrap();
        assert_eq!(
            angles,
            vec![(0.0, 0.0), (0.0, 180.0), (180.0, 0.0), (180.0, 180.0)]
        );
        let grid = test_target_grid(10, 5.0, 8.0, DEFAULT_ORIGIN).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid_angles(1).is_err());
    }

    #[test]
    fn held_out_grid_uses_high_shoulder_angles() {
        let held_out =
            test_target_grid_in(10, 5.0, 8.0, DEFAULT_ORIGIN, TargetRegion::TestOneThird).unwrap();
        // alpha ∈ {140, 160, 180}
        assert_eq!(held_out.len(), 30);
        let train = test_target_grid_in(10, 5.0, 8.0, DEFAULT_ORIGIN, TargetRegion::TrainTwoThirds)
            .unwrap();
        assert_eq!(train.len(), 70);
    }

    #[test]
    fn sampling_is_deterministic_and_region_bound() {
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            assert_eq!(
                sample_target(&mut a, 5.0, 8.0, DEFAULT_ORIGIN, TargetRegion::Full),
                sample_target(&mut b, 5.0, 8.0, DEFAULT_ORIGIN, TargetRegion::Full)
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let t = sample_target_with_angles(
                &mut rng,
                5.0,
                8.0,
                DEFAULT_ORIGIN,
                TargetRegion::TestOneThird,
            );
            assert!(t.alpha > 120.0 && t.alpha <= 180.0);
            let t = sample_target_with_angles(
                &mut rng,
                5.0,
                8.0,
                DEFAULT_ORIGIN,
                TargetRegion::TrainTwoThirds,
            );
            assert!((0.0..=120.0).contains(&t.alpha));
        }
    }

    #[test]
    fn ddpg_rejected_under_occlusion() {
        assert!(Condition::new(
            TargetMode::Changing,
            KinematicsMode::Static,
            VisionMode::Occluded,
            ControllerMode::Ddpg
        )
        .is_err());
        let c = Condition::new(
            TargetMode::Changing,
            KinematicsMode::Static,
            VisionMode::Occluded,
            ControllerMode::Spac,
        )
        .unwrap();
        assert_eq!(c.id(), "cs-occluded");
    }
}
