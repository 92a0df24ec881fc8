use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use aad_core::dataset::Dataset;
use aad_core::ensemble::{EnsembleModel, ForestConfig};
use aad_core::learner::{batch_active_learn, InitMode, LearnerConfig, QueryStrategy, SessionSettings};
use aad_core::log::SessionLog;
use aad_core::rank::mix_seed;
use aad_core::stream::{stream_active_learn, StreamConfig, UpdateMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{downsample_anomalies, load_dataset, CsvSchema};
use crate::error::{HarnessError, Result};
use crate::metrics::{anomalies_seen_curve, class_diversity_metric, mean_ci95, queried_tags, MetricSeries};
use crate::oracle::SimulatedOracle;
use crate::synth::{synth_generator, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Downsample {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        schema: CsvSchema,
        #[serde(default)]
        downsample: Option<Downsample>,
    },
    Synth {
        spec: SynthSpec,
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset<f64>> {
        match self {
            DataSource::Csv {
                path,
                schema,
                downsample,
            } => {
                let table = load_dataset(path, schema)?;
                match downsample {
                    Some(d) => Ok(downsample_anomalies(&table.dataset, d.rate, d.seed)?.0),
                    None => Ok(table.dataset),
                }
            }
            DataSource::Synth { spec, seed } => synth_generator(spec, *seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Top-ranked instances under fixed uniform weights on raw score vectors.
    Unsupervised,
    Batch {
        prior: bool,
        init: InitMode,
        strategy: QueryStrategy,
    },
    Stream {
        prior: bool,
        init: InitMode,
        strategy: QueryStrategy,
        update_mode: UpdateMode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    pub algorithm: Algorithm,
}

impl Arm {
    pub fn new(name: &str, algorithm: Algorithm) -> Self {
        Arm {
            name: name.into(),
            algorithm,
        }
    }

    pub fn unsupervised() -> Self {
        Arm::new("unsupervised", Algorithm::Unsupervised)
    }

    pub fn bal() -> Self {
        Arm::new(
            "bal",
            Algorithm::Batch {
                prior: true,
                init: InitMode::Uniform,
                strategy: QueryStrategy::Top,
            },
        )
    }

    pub fn bal_no_prior_unif() -> Self {
        Arm::new(
            "bal-no-prior-unif",
            Algorithm::Batch {
                prior: false,
                init: InitMode::Uniform,
                strategy: QueryStrategy::Top,
            },
        )
    }

    pub fn bal_no_prior_rand() -> Self {
        Arm::new(
            "bal-no-prior-rand",
            Algorithm::Batch {
                prior: false,
                init: InitMode::Random,
                strategy: QueryStrategy::Top,
            },
        )
    }

    pub fn bal_diverse() -> Self {
        Arm::new(
            "bal-diverse",
            Algorithm::Batch {
                prior: true,
                init: InitMode::Uniform,
                strategy: QueryStrategy::diverse_default(),
            },
        )
    }

    pub fn sal(update_mode: UpdateMode) -> Self {
        let name = match update_mode {
            UpdateMode::None => "sal-none",
            UpdateMode::ReplaceFraction { .. } => "sal-replace",
            UpdateMode::KlAdaptive => "sal-kl",
        };
        Arm::new(
            name,
            Algorithm::Stream {
                prior: true,
                init: InitMode::Uniform,
                strategy: QueryStrategy::Top,
                update_mode,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub arms: Vec<Arm>,
    pub seeds: Vec<u64>,
    pub budget: usize,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.arms.is_empty() {
            return Err(HarnessError::Config("at least one arm is required".into()));
        }
        let mut names: Vec<&str> = self.arms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::Config("arm names must be unique".into()));
        }
        if self.budget == 0 || self.batch_size == 0 {
            return Err(HarnessError::Config("budget and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub log: SessionLog,
    /// Set when the run stopped early; `log` holds the queries made before.
    pub error: Option<String>,
}

impl RunResult {
    pub fn anomalies_found(&self) -> usize {
        self.log.anomalies_found()
    }
}

#[derive(Debug, Clone)]
pub struct ArmResult {
    pub arm: Arm,
    pub runs: Vec<RunResult>,
    pub discovery: MetricSeries,
    pub diversity: Option<MetricSeries>,
}

impl ArmResult {
    pub fn found(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.anomalies_found() as f64).collect()
    }

    pub fn mean_found(&self) -> f64 {
        mean_ci95(&self.found()).0
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub arms: Vec<ArmResult>,
    pub n_instances: usize,
    pub n_anomalies: usize,
}

impl ExperimentResult {
    pub fn arm(&self, name: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm.name == name)
    }
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub n_instances: usize,
    pub n_anomalies: usize,
    pub dims: usize,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    Ok(serde_json::from_reader(File::open(path)?)?)
}

/// Runs every arm on every seed and, when an output directory is set,
/// writes per-run logs, aggregated curves, a summary and the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let data = config.data.load()?;
    let models: Vec<Result<EnsembleModel<f64>>> = config
        .seeds
        .par_iter()
        .map(|&seed| Ok(EnsembleModel::build(&data, config.forest, seed)?))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..config.arms.len())
        .flat_map(|a| (0..config.seeds.len()).map(move |s| (a, s)))
        .collect();
    let outcomes: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(a, s)| {
            let seed = config.seeds[s];
            match &models[s] {
                Ok(model) => run_arm(config, &config.arms[a].algorithm, &data, model, seed),
                Err(e) => RunResult {
                    seed,
                    log: SessionLog::default(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut per_arm: Vec<Vec<RunResult>> = vec![Vec::new(); config.arms.len()];
    for ((a, _), run) in jobs.into_iter().zip(outcomes) {
        per_arm[a].push(run);
    }
    let arms = config
        .arms
        .iter()
        .zip(per_arm)
        .map(|(arm, runs)| {
            let curves: Vec<Vec<f64>> = runs.iter().map(|r| anomalies_seen_curve(&r.log, None)).collect();
            let diversity = if data.class_tags().is_some() && config.batch_size > 1 {
                let series = runs
                    .iter()
                    .map(|r| class_diversity_metric(&queried_tags(&r.log, &data)?, config.batch_size))
                    .collect::<Result<Vec<_>>>()?;
                Some(MetricSeries::aggregate(&series))
            } else {
                None
            };
            Ok(ArmResult {
                arm: arm.clone(),
                discovery: MetricSeries::aggregate(&curves),
                diversity,
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let result = ExperimentResult {
        arms,
        n_instances: data.len(),
        n_anomalies: data.anomaly_count(),
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(config, &data, &result, dir)?;
    }
    Ok(result)
}

fn run_arm(
    config: &ExperimentConfig,
    algorithm: &Algorithm,
    data: &Dataset<f64>,
    model: &EnsembleModel<f64>,
    seed: u64,
) -> RunResult {
    let mut oracle = SimulatedOracle::new(data);
    let mut settings = SessionSettings {
        budget: config.budget,
        batch_size: config.batch_size,
        seed: mix_seed(seed, 1),
        ..SessionSettings::default()
    };
    let learner_for = |prior: bool, init: InitMode| LearnerConfig {
        prior_enabled: prior,
        init_mode: init,
        ..config.learner
    };
    let outcome = match *algorithm {
        Algorithm::Unsupervised => {
            settings.normalize = false;
            settings.update_weights = false;
            let learner = learner_for(true, InitMode::Uniform);
            batch_active_learn(model, data, &mut oracle, &learner, &settings).map(|o| o.log)
        }
        Algorithm::Batch { prior, init, strategy } => {
            settings.strategy = strategy;
            batch_active_learn(model, data, &mut oracle, &learner_for(prior, init), &settings).map(|o| o.log)
        }
        Algorithm::Stream {
            prior,
            init,
            strategy,
            update_mode,
        } => {
            settings.strategy = strategy;
            let stream = StreamConfig {
                budget: config.budget,
                update_mode,
                seed,
                ..config.stream
            };
            let windows = stream_windows(data, stream.window_size);
            stream_active_learn(
                windows,
                config.forest,
                &stream,
                &mut oracle,
                &learner_for(prior, init),
                &settings,
            )
            .map(|o| o.log)
        }
    };
    match outcome {
        Ok(log) => RunResult { seed, log, error: None },
        Err(aborted) => RunResult {
            seed,
            error: Some(aborted.error.to_string()),
            log: aborted.log,
        },
    }
}

/// Consecutive windows of `(row index, features)` in file order.
pub fn stream_windows(data: &Dataset<f64>, window_size: usize) -> Vec<Vec<(usize, Vec<f64>)>> {
    let size = window_size.max(1);
    data.points()
        .chunks(size)
        .enumerate()
        .map(|(w, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(|(i, x)| (w * size + i, x.clone()))
                .collect()
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_outputs(config: &ExperimentConfig, data: &Dataset<f64>, result: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        n_instances: data.len(),
        n_anomalies: data.anomaly_count(),
        dims: data.dims(),
    };
    serde_json::to_writer_pretty(create(&dir.join("manifest.json"))?, &manifest)?;

    let mut summary = String::from("arm,runs,failures,mean_found,ci95\n");
    for arm in &result.arms {
        let arm_dir = dir.join(&arm.arm.name);
        fs::create_dir_all(&arm_dir)?;
        for run in &arm.runs {
            run.log
                .write_csv(create(&arm_dir.join(format!("seed-{}.csv", run.seed)))?)?;
            if !run.log.drift.is_empty() {
                run.log
                    .write_drift_csv(create(&arm_dir.join(format!("seed-{}-drift.csv", run.seed)))?)?;
            }
            if let Some(err) = &run.error {
                fs::write(arm_dir.join(format!("seed-{}.error", run.seed)), err)?;
            }
        }
        arm.discovery
            .write_csv("queries", create(&dir.join(format!("{}-discovery.csv", arm.arm.name)))?)?;
        if let Some(div) = &arm.diversity {
            div.write_csv("batch", create(&dir.join(format!("{}-diversity.csv", arm.arm.name)))?)?;
        }
        let (mean, ci) = mean_ci95(&arm.found());
        summary.push_str(&format!(
            "{},{},{},{mean},{ci}\n",
            arm.arm.name,
            arm.runs.len(),
            arm.failures()
        ));
    }
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}
