use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::config::ExperimentConfig;
use super::io::export_csv;
use super::metrics::{EpisodeRecord, TestSummary};
use super::run::{evaluate, test_targets, train_run};
use super::{HarnessError, Result};
use crate::env::{ControllerMode, KinematicsMode, TargetMode, TargetRegion, VisionMode};

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub condition: String,
    pub model: ControllerMode,
    pub records: Vec<EpisodeRecord>,
    pub test_records: Vec<EpisodeRecord>,
    pub test: TestSummary,
    pub checkpoint_dir: Option<PathBuf>,
}

/// `<out>/<condition>/<model>/seed-<n>`.
pub fn run_dir(out: &Path, cfg: &ExperimentConfig, seed: u64) -> Result<PathBuf> {
    Ok(out
        .join(cfg.condition()?.id())
        .join(cfg.model.to_string())
        .join(format!("seed-{seed}")))
}

/// Trains one run, tests the frozen result on the run's own test targets
/// and, given `out`, writes checkpoint and CSVs into the run directory.
pub fn run_and_test(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<RunMetrics> {
    let trained = train_run(cfg, seed)?;
    let targets = test_targets(&trained.frozen, cfg, cfg.train_region)?;
    let test_records = evaluate(&trained.frozen, cfg, &targets, cfg.vision)?;
    let checkpoint_dir = match out {
        Some(out) => {
            let dir = run_dir(out, cfg, seed)?;
            save_checkpoint(&dir, &trained.frozen, cfg)?;
            export_csv(&trained.records, &dir.join("train.csv"))?;
            export_csv(&test_records, &dir.join("test.csv"))?;
            Some(dir)
        }
        None => None,
    };
    Ok(RunMetrics {
        seed,
        condition: cfg.condition()?.id(),
        model: cfg.model,
        test: TestSummary::from_records(&test_records),
        records: trained.records,
        test_records,
        checkpoint_dir,
    })
}

/// Runs `f` over `tasks` on a pool of `jobs` threads, keeping task order.
pub fn parallel_map<T, U, F>(jobs: usize, tasks: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| tasks.par_iter().map(f).collect())
}

/// Every seed of `cfg`, run and tested.
pub fn run_seeds(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    parallel_map(cfg.jobs, &cfg.seeds, |&seed| run_and_test(cfg, seed, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub model: ControllerMode,
    pub target: TargetMode,
    pub seeds: usize,
    pub held_out_targets: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
}

/// Trains on targets from the lower two thirds of shoulder angles and tests
/// on the grid points of the remaining third, for static and changing
/// training targets.
pub fn generalization_experiment(
    cfg: &ExperimentConfig,
    models: &[ControllerMode],
) -> Result<(Vec<GeneralizationRow>, Vec<RunMetrics>)> {
    let mut tasks = Vec::new();
    for &model in models {
        for target in [TargetMode::Static, TargetMode::Changing] {
            let c = ExperimentConfig {
                model,
                target,
                kinematics: KinematicsMode::Static,
                vision: VisionMode::Perfect,
                train_region: TargetRegion::TrainTwoThirds,
                ..cfg.clone()
            };
            c.validate()?;
            for &seed in &cfg.seeds {
                tasks.push((c.clone(), seed));
            }
        }
    }
    let runs = parallel_map(cfg.jobs, &tasks, |(c, seed)| {
        let trained = train_run(c, *seed)?;
        let targets = test_targets(&trained.frozen, c, TargetRegion::TestOneThird)?;
        let test_records = evaluate(&trained.frozen, c, &targets, VisionMode::Perfect)?;
        Ok(RunMetrics {
            seed: *seed,
            condition: c.condition()?.id(),
            model: c.model,
            test: TestSummary::from_records(&test_records),
            records: trained.records,
            test_records,
            checkpoint_dir: None,
        })
    })?;
    let mut rows = Vec::new();
    for &model in models {
        for target in [TargetMode::Static, TargetMode::Changing] {
            let group: Vec<&RunMetrics> = tasks
                .iter()
                .zip(&runs)
                .filter(|((c, _), _)| c.model == model && c.target == target)
                .map(|(_, r)| r)
                .collect();
            let n = group.len().max(1) as f64;
            rows.push(GeneralizationRow {
                model,
                target,
                seeds: group.len(),
                held_out_targets: group.first().map_or(0, |r| r.test.episodes),
                success_rate: group.iter().map(|r| r.test.success_rate).sum::<f64>() / n,
                mean_steps: group.iter().map(|r| r.test.mean_steps).sum::<f64>() / n,
            });
        }
    }
    Ok((rows, runs))
}
