use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apac_core::env::{ControllerMode, KinematicsMode, TargetMode, TargetRegion, VisionMode};
use apac_core::harness::{
    emit_plots, evaluate, export_csv, find_csvs, generalization_experiment, load_checkpoint,
    run_seeds, test_targets, ExperimentConfig, RunMetrics, TestSummary, DESK_HIDDEN,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(
    name = "apac",
    version,
    about = "Arm-reaching experiments with arbitrated habitual and planning control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and test every seed of one condition.
    Train(TrainArgs),
    /// Test a saved checkpoint on fresh targets.
    Eval(EvalArgs),
    /// Train on two thirds of the workspace, test on the rest.
    Generalize(GeneralizeArgs),
    /// Render SVG charts from CSV records.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Ddpg,
    Spac,
    Apac,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Static,
    Changing,
}

#[derive(Clone, Copy, ValueEnum)]
enum Vision {
    Perfect,
    Occluded,
}

#[derive(Clone, Copy, ValueEnum)]
enum Region {
    Full,
    Train,
    Test,
}

impl From<Model> for ControllerMode {
    fn from(m: Model) -> Self {
        match m {
            Model::Ddpg => ControllerMode::Ddpg,
            Model::Spac => ControllerMode::Spac,
            Model::Apac => ControllerMode::Apac,
        }
    }
}

impl From<Mode> for TargetMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Static => TargetMode::Static,
            Mode::Changing => TargetMode::Changing,
        }
    }
}

impl From<Mode> for KinematicsMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Static => KinematicsMode::Static,
            Mode::Changing => KinematicsMode::Changing,
        }
    }
}

impl From<Vision> for VisionMode {
    fn from(v: Vision) -> Self {
        match v {
            Vision::Perfect => VisionMode::Perfect,
            Vision::Occluded => VisionMode::Occluded,
        }
    }
}

impl From<Region> for TargetRegion {
    fn from(r: Region) -> Self {
        match r {
            Region::Full => TargetRegion::Full,
            Region::Train => TargetRegion::TrainTwoThirds,
            Region::Test => TargetRegion::TestOneThird,
        }
    }
}

/// Settings shared by the commands that train. Every flag overrides the
/// matching key of `--config`.
#[derive(Args)]
struct RunFlags {
    /// TOML file with any subset of the configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeds, run as seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Episodes per run including babbling.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    babbling_episodes: Option<usize>,
    /// Runs executed in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Narrow hidden layers for quick runs.
    #[arg(long)]
    desk: bool,
    /// Hidden widths, e.g. `--hidden 400 300`.
    #[arg(long, num_args = 2, value_names = ["H0", "H1"])]
    hidden: Option<Vec<usize>>,
}

impl RunFlags {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if self.desk {
            cfg.hidden = DESK_HIDDEN;
        }
        if let Some(h) = &self.hidden {
            cfg.hidden = [h[0], h[1]];
        }
        if let Some(n) = self.seeds {
            cfg.seeds = (0..n).collect();
        }
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if let Some(n) = self.babbling_episodes {
            cfg.babbling_episodes = n;
        }
        if let Some(n) = self.jobs {
            cfg.jobs = n;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long, value_enum)]
    target: Option<Mode>,
    #[arg(long, value_enum)]
    kinematics: Option<Mode>,
    #[arg(long, value_enum)]
    vision: Option<Vision>,
    /// Output directory for checkpoints and CSVs.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// A run directory written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the vision mode the run was trained for.
    #[arg(long, value_enum)]
    vision: Option<Vision>,
    #[arg(long, value_enum)]
    region: Option<Region>,
    /// Grid points per joint axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Where to write per-episode test records.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GeneralizeArgs {
    #[command(flatten)]
    run: RunFlags,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["ddpg", "spac", "apac"])]
    models: Vec<Model>,
    #[arg(long, default_value = "runs/generalization")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory searched recursively for CSV files.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Generalize(a) => generalize(a),
        Command::Plot(a) => plot(a),
    }
}

fn print_summary(label: &str, s: &TestSummary) {
    println!(
        "{label}: success {:.3}  steps {:.2}  distance {:.3} [{:.3}, {:.3}]  habitual {:.3}  time cost {:.2}",
        s.success_rate,
        s.mean_steps,
        s.mean_final_distance,
        s.min_final_distance,
        s.max_final_distance,
        s.habitual_fraction,
        s.mean_time_cost
    );
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.run.load()?;
    if let Some(m) = a.model {
        cfg.model = m.into();
    }
    if let Some(t) = a.target {
        cfg.target = t.into();
    }
    if let Some(k) = a.kinematics {
        cfg.kinematics = k.into();
    }
    if let Some(v) = a.vision {
        cfg.vision = v.into();
    }
    cfg.validate()?;
    fs::create_dir_all(&a.out)?;
    let runs = run_seeds(&cfg, Some(&a.out))?;
    for r in &runs {
        print_summary(
            &format!("{} {} seed {}", r.condition, r.model, r.seed),
            &r.test,
        );
    }
    let pooled: Vec<_> = runs
        .iter()
        .flat_map(|r| r.test_records.iter().cloned())
        .collect();
    print_summary("all seeds", &TestSummary::from_records(&pooled));
    if let Some(dir) = runs.first().and_then(|r| r.checkpoint_dir.as_deref()) {
        println!("wrote {}", dir.parent().unwrap_or(dir).display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (frozen, mut cfg) = load_checkpoint(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    if let Some(n) = a.grid {
        cfg.test_grid = n;
    }
    let vision = a.vision.map_or(cfg.vision, VisionMode::from);
    if vision == VisionMode::Occluded && cfg.model == ControllerMode::Ddpg {
        bail!("ddpg agents cannot be tested under occluded vision");
    }
    let region = a.region.map_or(cfg.train_region, TargetRegion::from);
    let targets = test_targets(&frozen, &cfg, region)?;
    let records = evaluate(&frozen, &cfg, &targets, vision)?;
    print_summary(
        &a.checkpoint.display().to_string(),
        &TestSummary::from_records(&records),
    );
    if let Some(path) = a.csv {
        export_csv(&records, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_generalization(out: &Path, runs: &[RunMetrics]) -> Result<()> {
    for r in runs {
        let dir = out
            .join(&r.condition)
            .join(r.model.to_string())
            .join(format!("seed-{}", r.seed));
        export_csv(&r.records, &dir.join("train.csv"))?;
        export_csv(&r.test_records, &dir.join("test.csv"))?;
    }
    Ok(())
}

fn generalize(a: GeneralizeArgs) -> Result<()> {
    let cfg = a.run.load()?;
    let models: Vec<ControllerMode> = a.models.iter().map(|&m| m.into()).collect();
    let (rows, runs) = generalization_experiment(&cfg, &models)?;
    write_generalization(&a.out, &runs)?;
    println!(
        "{:<6} {:<9} {:>6} {:>8} {:>9} {:>7}",
        "model", "training", "seeds", "targets", "success", "steps"
    );
    let mut table =
        String::from("model\ttarget\tseeds\theld_out_targets\tsuccess_rate\tmean_steps\n");
    for r in &rows {
        let target = match r.target {
            TargetMode::Static => "static",
            TargetMode::Changing => "changing",
        };
        println!(
            "{:<6} {:<9} {:>6} {:>8} {:>9.3} {:>7.2}",
            r.model, target, r.seeds, r.held_out_targets, r.success_rate, r.mean_steps
        );
        table.push_str(&format!(
            "{}\t{target}\t{}\t{}\t{}\t{}\n",
            r.model, r.seeds, r.held_out_targets, r.success_rate, r.mean_steps
        ));
    }
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("summary.tsv");
    fs::write(&path, table)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let csvs = find_csvs(&a.input)?;
    if csvs.is_empty() {
        bail!("no CSV files below {}", a.input.display());
    }
    for path in emit_plots(&csvs, &a.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
