use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::env::ControllerMode;

/// One row of the per-episode CSV.
///
/// Babbling episodes carry zero habitual and planning steps; their steps are
/// recovered by [`EpisodeRecord::babble_steps`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub condition: String,
    pub model: ControllerMode,
    pub episode: usize,
    pub success: bool,
    pub steps: usize,
    pub habitual_steps: usize,
    pub planning_steps: usize,
    pub time_cost: f64,
    pub final_distance: f64,
}

impl EpisodeRecord {
    pub fn babble_steps(&self) -> usize {
        self.steps - self.habitual_steps - self.planning_steps
    }

    pub fn is_babble(&self) -> bool {
        self.babble_steps() > 0
    }
}

/// Habitual steps count once, planning steps `factor` times, babbling once.
pub fn time_cost(habitual: usize, planning: usize, babble: usize, factor: f64) -> f64 {
    habitual as f64 + factor * planning as f64 + babble as f64
}

/// Trailing mean over the last `window` values; shorter at the start.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn success_series(records: &[EpisodeRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| if r.success { 1.0 } else { 0.0 })
        .collect()
}

/// Pooled habitual share of all controller-chosen steps in the episode range.
pub fn habitual_fraction(records: &[EpisodeRecord], episodes: Range<usize>) -> Option<f64> {
    let (hab, total) = records
        .iter()
        .filter(|r| episodes.contains(&r.episode))
        .fold((0usize, 0usize), |(h, t), r| {
            (
                h + r.habitual_steps,
                t + r.habitual_steps + r.planning_steps,
            )
        });
    (total > 0).then(|| hab as f64 / total as f64)
}

pub fn mean_time_cost(records: &[EpisodeRecord], episodes: Range<usize>) -> Option<f64> {
    mean(
        records
            .iter()
            .filter(|r| episodes.contains(&r.episode))
            .map(|r| r.time_cost),
    )
}

pub fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// First episode index (relative to `from`) at which the moving-average
/// success reaches `level`.
pub fn episodes_to_reach(
    records: &[EpisodeRecord],
    from: usize,
    window: usize,
    level: f64,
) -> Option<usize> {
    let tail: Vec<&EpisodeRecord> = records.iter().filter(|r| r.episode >= from).collect();
    let series: Vec<f64> = tail
        .iter()
        .map(|r| if r.success { 1.0 } else { 0.0 })
        .collect();
    moving_average(&series, window)
        .iter()
        .enumerate()
        .find(|&(i, &m)| i + 1 >= window && m >= level)
        .map(|(i, _)| i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_steps: f64,
    pub mean_final_distance: f64,
    pub min_final_distance: f64,
    pub max_final_distance: f64,
    pub habitual_fraction: f64,
    pub mean_time_cost: f64,
}

impl TestSummary {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let n = records.len().max(1) as f64;
        let sum = |f: &dyn Fn(&EpisodeRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let dist = records.iter().map(|r| r.final_distance);
        Self {
            episodes: records.len(),
            success_rate: sum(&|r| if r.success { 1.0 } else { 0.0 }),
            mean_steps: sum(&|r| r.steps as f64),
            mean_final_distance: sum(&|r| r.final_distance),
            min_final_distance: dist.clone().fold(f64::INFINITY, f64::min),
            max_final_distance: dist.fold(f64::NEG_INFINITY, f64::max),
            habitual_fraction: habitual_fraction(records, 0..usize::MAX).unwrap_or(0.0),
            mean_time_cost: sum(&|r| r.time_cost),
        }
    }
}
