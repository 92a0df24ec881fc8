//! Datasets, simulated analysts, evaluation metrics and seeded experiment
//! runs for `aad-core`.

pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod oracle;
pub mod synth;

pub use data::{downsample_anomalies, load_dataset, wdbc_fixture, write_dataset, CsvSchema, Table};
pub use error::{HarnessError, Result};
pub use experiment::{
    load_manifest, run_experiment, stream_windows, Algorithm, Arm, ArmResult, DataSource, Downsample, ExperimentConfig,
    ExperimentResult, Manifest, RunResult,
};
pub use metrics::{
    angle_histogram, anomalies_seen_curve, class_diversity_metric, mean_ci95, queried_tags, AngleHistogram,
    MetricSeries, DEFAULT_ANGLE_BINS, DEFAULT_ANGLE_RANGE,
};
pub use oracle::SimulatedOracle;
pub use synth::{synth_generator, AnomalyBox, ClusterSpec, DriftSpec, SynthSpec};
