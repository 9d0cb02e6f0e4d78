use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::io::read_csv;
use super::metrics::{moving_average, EpisodeRecord};
use super::{HarnessError, Result};
use crate::env::{ControllerMode, TARGET_RADIUS};

pub const SMOOTHING_WINDOW: usize = 50;

type Grouped = BTreeMap<String, BTreeMap<String, BTreeMap<u64, Vec<EpisodeRecord>>>>;

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn colour(model: &str) -> RGBColor {
    match model {
        "ddpg" => RGBColor(200, 40, 40),
        "spac" => RGBColor(40, 90, 200),
        _ => RGBColor(30, 150, 60),
    }
}

fn group(records: Vec<EpisodeRecord>, into: &mut Grouped) {
    for r in records {
        into.entry(r.condition.clone())
            .or_default()
            .entry(r.model.to_string())
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r);
    }
}

/// Mean over seeds of a per-episode series, episode-aligned.
fn seed_mean(
    runs: &BTreeMap<u64, Vec<EpisodeRecord>>,
    f: impl Fn(&[EpisodeRecord]) -> Vec<f64>,
) -> Vec<f64> {
    let series: Vec<Vec<f64>> = runs.values().map(|r| f(r)).collect();
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / series.len() as f64)
        .collect()
}

struct Line {
    label: String,
    colour: RGBColor,
    points: Vec<(f64, f64)>,
}

fn line_chart(
    path: &Path,
    title: &str,
    x_desc: &str,
    y_desc: &str,
    lines: &[Line],
    y_range: Option<(f64, f64)>,
) -> Result<()> {
    let x_max = lines
        .iter()
        .flat_map(|l| l.points.iter().map(|p| p.0))
        .fold(1.0, f64::max);
    let (y_min, y_max) = y_range.unwrap_or_else(|| {
        let ys = lines.iter().flat_map(|l| l.points.iter().map(|p| p.1));
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });
        if lo.is_finite() {
            (lo.min(0.0), hi * 1.05 + 1e-9)
        } else {
            (0.0, 1.0)
        }
    });
    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..x_max, y_min..y_max)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;
    for line in lines {
        let c = line.colour;
        chart
            .draw_series(LineSeries::new(
                line.points.iter().copied(),
                c.stroke_width(2),
            ))
            .map_err(plot_err)?
            .label(line.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn indexed(values: Vec<f64>, offset: usize) -> Vec<(f64, f64)> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| ((i + offset) as f64, v))
        .collect()
}

fn training_plots(
    condition: &str,
    models: &BTreeMap<String, BTreeMap<u64, Vec<EpisodeRecord>>>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let mut success = Vec::new();
    let mut habitual = Vec::new();
    let mut cost = Vec::new();
    for (model, runs) in models {
        let colour = colour(model);
        let s = seed_mean(runs, |r| {
            let v: Vec<f64> = r
                .iter()
                .map(|e| if e.success { 1.0 } else { 0.0 })
                .collect();
            moving_average(&v, SMOOTHING_WINDOW)
        });
        success.push(Line {
            label: model.clone(),
            colour,
            points: indexed(s, 0),
        });
        let babble = runs
            .values()
            .next()
            .map(|r| r.iter().take_while(|e| e.is_babble()).count())
            .unwrap_or(0);
        let h = seed_mean(runs, |r| {
            let v: Vec<f64> = r[babble.min(r.len())..]
                .iter()
                .map(|e| {
                    let chosen = e.habitual_steps + e.planning_steps;
                    if chosen == 0 {
                        0.0
                    } else {
                        e.habitual_steps as f64 / chosen as f64
                    }
                })
                .collect();
            moving_average(&v, SMOOTHING_WINDOW)
        });
        habitual.push(Line {
            label: model.clone(),
            colour,
            points: indexed(h, babble),
        });
        let c = seed_mean(runs, |r| {
            let v: Vec<f64> = r[babble.min(r.len())..]
                .iter()
                .map(|e| e.time_cost)
                .collect();
            moving_average(&v, SMOOTHING_WINDOW)
        });
        cost.push(Line {
            label: model.clone(),
            colour,
            points: indexed(c, babble),
        });
    }
    let mut paths = Vec::new();
    let mut emit = |name: String, title: String, y: &str, lines: &[Line], range| -> Result<()> {
        let path = out.join(name);
        line_chart(&path, &title, "episode", y, lines, range)?;
        paths.push(path);
        Ok(())
    };
    emit(
        format!("success_{condition}.svg"),
        format!("training success, {condition}"),
        "success rate (moving average)",
        &success,
        Some((0.0, 1.0)),
    )?;
    emit(
        format!("sources_{condition}.svg"),
        format!("habitual action share, {condition}"),
        "habitual fraction (moving average)",
        &habitual,
        Some((0.0, 1.0)),
    )?;
    emit(
        format!("time_cost_{condition}.svg"),
        format!("episode time cost, {condition}"),
        "time cost (moving average)",
        &cost,
        None,
    )?;
    Ok(paths)
}

/// Mean actual final distance per test episode with a min-max band across
/// seeds, one panel per model.
fn distance_plot(
    condition: &str,
    models: &BTreeMap<String, BTreeMap<u64, Vec<EpisodeRecord>>>,
    path: &Path,
) -> Result<()> {
    let root = SVGBackend::new(path, (900, 380 * models.len().max(1) as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((models.len().max(1), 1));
    for ((model, runs), area) in models.iter().zip(panels.iter()) {
        let len = runs.values().map(Vec::len).min().unwrap_or(0);
        let stats: Vec<(f64, f64, f64)> = (0..len)
            .map(|i| {
                let d: Vec<f64> = runs.values().map(|r| r[i].final_distance).collect();
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mean, lo, hi)
            })
            .collect();
        let y_max = stats
            .iter()
            .map(|s| s.2)
            .fold(TARGET_RADIUS * 2.0, f64::max)
            * 1.05;
        let x_max = (len.max(2) - 1) as f64;
        let mut chart = ChartBuilder::on(area)
            .caption(
                format!("{model}: final distance, {condition}"),
                ("sans-serif", 20),
            )
            .margin(12)
            .x_label_area_size(35)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..x_max, 0.0..y_max)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("test episode")
            .y_desc("distance (cm)")
            .draw()
            .map_err(plot_err)?;
        let band: Vec<(f64, f64)> = stats
            .iter()
            .enumerate()
            .map(|(i, s)| (i as f64, s.2))
            .chain(stats.iter().enumerate().rev().map(|(i, s)| (i as f64, s.1)))
            .collect();
        chart
            .draw_series(std::iter::once(Polygon::new(
                band,
                RGBColor(90, 140, 230).mix(0.35),
            )))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                stats.iter().enumerate().map(|(i, s)| (i as f64, s.0)),
                BLACK.stroke_width(2),
            ))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                [(0.0, TARGET_RADIUS), (x_max, TARGET_RADIUS)],
                RED.stroke_width(2),
            ))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Reads training and test CSVs and writes SVG charts into `out_dir`.
///
/// Files whose name starts with `test` are treated as test records; every
/// other CSV as training records.
pub fn emit_plots(csv_paths: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut train = Grouped::new();
    let mut test = Grouped::new();
    for path in csv_paths {
        let is_test = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("test"));
        group(
            read_csv(path)?,
            if is_test { &mut test } else { &mut train },
        );
    }
    let mut written = Vec::new();
    for (condition, models) in &train {
        written.extend(training_plots(condition, models, out_dir)?);
    }
    for (condition, models) in &test {
        if condition.ends_with("occluded") {
            let planners: BTreeMap<_, _> = models
                .iter()
                .filter(|(m, _)| m.as_str() != ControllerMode::Ddpg.to_string())
                .map(|(m, r)| (m.clone(), r.clone()))
                .collect();
            let path = out_dir.join(format!("distance_{condition}.svg"));
            distance_plot(condition, &planners, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// All CSV files below `dir`, sorted.
pub fn find_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}
