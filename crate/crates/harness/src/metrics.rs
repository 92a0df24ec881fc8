use std::collections::BTreeSet;
use std::io::Write;

use aad_core::dataset::Dataset;
use aad_core::ensemble::EnsembleModel;
use aad_core::log::SessionLog;
use aad_core::Scalar;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Per-x mean and 95% confidence half-width across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub x: Vec<usize>,
    pub y_mean: Vec<f64>,
    pub y_ci95: Vec<f64>,
}

/// Mean and `1.96 * sample std / sqrt(n)`; the half-width is 0 for one value.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

impl MetricSeries {
    /// Aggregates per-run curves indexed `1..`. Shorter runs hold their last
    /// value, since no further queries means no further change.
    pub fn aggregate(runs: &[Vec<f64>]) -> Self {
        let len = runs.iter().map(Vec::len).max().unwrap_or(0);
        let mut series = MetricSeries {
            x: (1..=len).collect(),
            y_mean: Vec::with_capacity(len),
            y_ci95: Vec::with_capacity(len),
        };
        for i in 0..len {
            let column: Vec<f64> = runs.iter().filter_map(|r| r.get(i).or(r.last()).copied()).collect();
            let (m, ci) = mean_ci95(&column);
            series.y_mean.push(m);
            series.y_ci95.push(ci);
        }
        series
    }

    pub fn write_csv<W: Write>(&self, x_name: &str, mut out: W) -> Result<()> {
        writeln!(out, "{x_name},mean,ci95")?;
        for ((x, m), c) in self.x.iter().zip(&self.y_mean).zip(&self.y_ci95) {
            writeln!(out, "{x},{m},{c}")?;
        }
        Ok(())
    }
}

/// Cumulative anomalies after each query, as a percentage of `total` when given.
pub fn anomalies_seen_curve(log: &SessionLog, total: Option<usize>) -> Vec<f64> {
    log.queries
        .iter()
        .map(|r| match total {
            Some(t) if t > 0 => 100.0 * r.cum_anomalies as f64 / t as f64,
            _ => r.cum_anomalies as f64,
        })
        .collect()
}

/// Running mean over batches of the number of distinct class tags per batch.
///
/// `tags` holds the tag of every queried instance in query order; batch `t`
/// is the `t`-th run of `batch_size` consecutive queries.
pub fn class_diversity_metric(tags: &[String], batch_size: usize) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(HarnessError::Config("batch size is zero".into()));
    }
    let mut total = 0usize;
    Ok(tags
        .chunks(batch_size)
        .enumerate()
        .map(|(t, batch)| {
            total += batch.iter().collect::<BTreeSet<_>>().len();
            total as f64 / (t + 1) as f64
        })
        .collect())
}

/// Tags of the queried instances, in query order.
pub fn queried_tags<S: Scalar>(log: &SessionLog, data: &Dataset<S>) -> Result<Vec<String>> {
    let tags = data
        .class_tags()
        .ok_or_else(|| HarnessError::Config("dataset has no class tags".into()))?;
    log.queries
        .iter()
        .map(|r| {
            tags.get(r.instance_id)
                .cloned()
                .ok_or(HarnessError::UnknownInstance(r.instance_id))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    /// `bins + 1` edges in degrees.
    pub edges: Vec<f64>,
    pub anomaly: Vec<usize>,
    pub nominal: Vec<usize>,
    pub anomaly_angles: Vec<f64>,
    pub nominal_angles: Vec<f64>,
    /// Instances with an all-zero score vector.
    pub excluded: usize,
}

impl AngleHistogram {
    pub fn anomaly_mean(&self) -> f64 {
        mean_ci95(&self.anomaly_angles).0
    }

    pub fn nominal_mean(&self) -> f64 {
        mean_ci95(&self.nominal_angles).0
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,anomaly,nominal")?;
        for i in 0..self.anomaly.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.anomaly[i],
                self.nominal[i]
            )?;
        }
        Ok(())
    }
}

pub const DEFAULT_ANGLE_BINS: usize = 60;
pub const DEFAULT_ANGLE_RANGE: (f64, f64) = (0.0, 120.0);

/// Angle in degrees between an unnormalized score vector and `w_unif`.
pub fn angle_to_uniform<S: Scalar>(model: &EnsembleModel<S>, x: &[S]) -> Result<Option<f64>> {
    let z = model.transform(x, false)?;
    let norm = z.norm().as_f64();
    if norm == 0.0 {
        return Ok(None);
    }
    let u = 1.0 / (model.n_leaves() as f64).sqrt();
    let cos = z.sum().as_f64() * u / norm;
    Ok(Some(cos.clamp(-1.0, 1.0).acos().to_degrees()))
}

/// Fixed-width histograms of angles to `w_unif`, split by hidden label.
/// Angles outside `range` land in the edge bins.
pub fn angle_histogram<S: Scalar>(
    model: &EnsembleModel<S>,
    data: &Dataset<S>,
    bins: usize,
    range: (f64, f64),
) -> Result<AngleHistogram> {
    if bins == 0 || !(range.1 > range.0) {
        return Err(HarnessError::Config(
            "histogram needs at least one bin and a non-empty range".into(),
        ));
    }
    let width = (range.1 - range.0) / bins as f64;
    let mut h = AngleHistogram {
        edges: (0..=bins).map(|i| range.0 + width * i as f64).collect(),
        anomaly: vec![0; bins],
        nominal: vec![0; bins],
        anomaly_angles: Vec::new(),
        nominal_angles: Vec::new(),
        excluded: 0,
    };
    for (x, label) in data.points().iter().zip(data.hidden_labels()) {
        let Some(angle) = angle_to_uniform(model, x)? else {
            h.excluded += 1;
            continue;
        };
        let bin = (((angle - range.0) / width).floor().max(0.0) as usize).min(bins - 1);
        if label.is_anomaly() {
            h.anomaly[bin] += 1;
            h.anomaly_angles.push(angle);
        } else {
            h.nominal[bin] += 1;
            h.nominal_angles.push(angle);
        }
    }
    Ok(h)
}
