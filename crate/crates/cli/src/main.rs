use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aad_core::description::{build_cover_problem, export_description, solve_cover, DEFAULT_DELTA};
use aad_core::ensemble::{load_model, save_model, EnsembleModel, ForestConfig};
use aad_harness::{
    angle_histogram, load_manifest, mean_ci95, run_experiment, write_dataset, Algorithm, Arm, DataSource,
    ExperimentConfig, DEFAULT_ANGLE_BINS, DEFAULT_ANGLE_RANGE,
};
use aad_service::SessionStore;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

mod config;

#[derive(Debug, Parser)]
#[command(
    name = "aad",
    version,
    about = "Active anomaly discovery with isolation-forest leaf ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML config file (JSON when the name ends in .json).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set forest.n_trees=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Rerun the configuration stored in a manifest.json instead.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a forest on a dataset and save it as JSON.
    Build(ConfigArgs),
    /// Run batch active-learning arms over several seeds.
    BatchAl(ExperimentArgs),
    /// Run streaming active-learning arms over several seeds.
    StreamAl(ExperimentArgs),
    /// Compact description of a set of instances under a saved model.
    Describe(ConfigArgs),
    /// Angle diagnostic: score-vector angles to the uniform weights by label.
    Eval(ConfigArgs),
    /// Write a dataset (usually synthetic) to CSV.
    Synth(ConfigArgs),
    /// Serve the session API.
    Serve {
        /// Session store directory.
        #[arg(long, default_value = "aad-sessions")]
        dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Build(args) => build(&args),
        Command::BatchAl(args) => experiment(&args, false),
        Command::StreamAl(args) => experiment(&args, true),
        Command::Describe(args) => describe(&args),
        Command::Eval(args) => eval(&args),
        Command::Synth(args) => synth(&args),
        Command::Serve { dir, addr } => serve(&dir, addr),
    }
}

fn load<T: serde::de::DeserializeOwned>(args: &ConfigArgs) -> Result<T> {
    config::parse(config::load(args.config.as_deref(), &args.sets)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildConfig {
    data: DataSource,
    #[serde(default)]
    forest: ForestConfig,
    #[serde(default)]
    seed: u64,
    output: PathBuf,
}

fn build(args: &ConfigArgs) -> Result<()> {
    let cfg: BuildConfig = load(args)?;
    let data = cfg.data.load()?;
    let model = EnsembleModel::build(&data, cfg.forest, cfg.seed)?;
    if let Some(dir) = cfg.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&model, &cfg.output)?;
    println!(
        "{} trees, {} leaves over {} rows -> {}",
        model.n_trees(),
        model.n_leaves(),
        data.len(),
        cfg.output.display()
    );
    Ok(())
}

fn is_stream(arm: &Arm) -> bool {
    matches!(arm.algorithm, Algorithm::Stream { .. })
}

fn experiment(args: &ExperimentArgs, stream: bool) -> Result<()> {
    let mut value = match &args.manifest {
        Some(path) => toml::Value::try_from(load_manifest(path)?.config)?,
        None => match &args.config.config {
            Some(path) => config::read(path)?,
            None => toml::Value::Table(Default::default()),
        },
    };
    if value.get("arms").is_none() {
        let arms = if stream {
            vec![Arm::unsupervised(), Arm::sal(aad_core::stream::UpdateMode::KlAdaptive)]
        } else {
            vec![
                Arm::unsupervised(),
                Arm::bal(),
                Arm::bal_no_prior_unif(),
                Arm::bal_no_prior_rand(),
            ]
        };
        if let Some(table) = value.as_table_mut() {
            table.insert("arms".into(), toml::Value::try_from(arms)?);
        }
    }
    let cfg: ExperimentConfig = config::parse(config::finish(value, &args.config.sets)?)?;
    let misplaced = cfg
        .arms
        .iter()
        .find(|a| is_stream(a) != stream && !matches!(a.algorithm, Algorithm::Unsupervised));
    if let Some(arm) = misplaced {
        let which = if stream { "stream-al" } else { "batch-al" };
        bail!("arm {:?} does not belong in {which}", arm.name);
    }
    let result = run_experiment(&cfg)?;
    println!("{} rows, {} anomalies", result.n_instances, result.n_anomalies);
    println!(
        "{:<22} {:>6} {:>9} {:>11} {:>8}",
        "arm", "runs", "failures", "mean_found", "ci95"
    );
    for arm in &result.arms {
        let (mean, ci) = mean_ci95(&arm.found());
        println!(
            "{:<22} {:>6} {:>9} {:>11.2} {:>8.2}",
            arm.arm.name,
            arm.runs.len(),
            arm.failures(),
            mean,
            ci
        );
    }
    if let Some(dir) = &cfg.output_dir {
        println!("results in {}", dir.display());
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescribeConfig {
    model: PathBuf,
    data: DataSource,
    ids: Vec<usize>,
    #[serde(default = "default_delta")]
    delta: usize,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn default_delta() -> usize {
    DEFAULT_DELTA
}

fn describe(args: &ConfigArgs) -> Result<()> {
    let cfg: DescribeConfig = load(args)?;
    let model: EnsembleModel<f64> = load_model(&cfg.model)?;
    let data = cfg.data.load()?;
    let instances = cfg
        .ids
        .iter()
        .map(|&i| {
            if i >= data.len() {
                bail!("instance {i} is out of range ({} rows)", data.len());
            }
            Ok((i, data.point(i)))
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = build_cover_problem(&model, &instances, cfg.delta)?;
    let description = solve_cover(&problem)?;
    let export = export_description(&model, &problem, &description)?;
    match &cfg.output {
        Some(path) => serde_json::to_writer_pretty(create(path)?, &export)?,
        None => {
            serde_json::to_writer_pretty(io::stdout().lock(), &export)?;
            println!();
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfig {
    data: DataSource,
    #[serde(default)]
    forest: ForestConfig,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_bins")]
    bins: usize,
    #[serde(default = "default_range")]
    range: (f64, f64),
    #[serde(default)]
    output: Option<PathBuf>,
}

fn default_bins() -> usize {
    DEFAULT_ANGLE_BINS
}

fn default_range() -> (f64, f64) {
    DEFAULT_ANGLE_RANGE
}

fn eval(args: &ConfigArgs) -> Result<()> {
    let cfg: EvalConfig = load(args)?;
    let data = cfg.data.load()?;
    let model = EnsembleModel::build(&data, cfg.forest, cfg.seed)?;
    let h = angle_histogram(&model, &data, cfg.bins, cfg.range)?;
    println!("anomaly_mean_angle,nominal_mean_angle,excluded");
    println!("{},{},{}", h.anomaly_mean(), h.nominal_mean(), h.excluded);
    if let Some(path) = &cfg.output {
        h.write_csv(create(path)?)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthConfig {
    data: DataSource,
    output: PathBuf,
}

fn synth(args: &ConfigArgs) -> Result<()> {
    let cfg: SynthConfig = load(args)?;
    let data = cfg.data.load()?;
    let mut out = create(&cfg.output)?;
    let schema = write_dataset(&data, &mut out)?;
    out.flush()?;
    eprintln!(
        "{} rows, {} anomalies -> {}",
        data.len(),
        data.anomaly_count(),
        cfg.output.display()
    );
    // ready to paste into another config
    let source = DataSource::Csv {
        path: cfg.output,
        schema,
        downsample: None,
    };
    let mut block = toml::Table::new();
    block.insert("data".into(), toml::Value::try_from(source)?);
    print!("{}", toml::to_string(&block)?);
    Ok(())
}

fn serve(dir: &Path, addr: SocketAddr) -> Result<()> {
    let store = Arc::new(SessionStore::open(dir)?);
    eprintln!("{} stored sessions; listening on http://{addr}", store.ids().len());
    tokio::runtime::Runtime::new()?.block_on(aad_service::serve(store, addr))?;
    Ok(())
}
