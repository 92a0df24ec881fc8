use aad_core::dataset::Dataset;
use aad_core::Label;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Axis-aligned Gaussian nominal cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Relative share of nominal points.
    pub weight: f64,
}

/// Region anomalies of one class are drawn from, uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Mean shift applied to every row from `start_window` on.
///
/// Nominal rows move by `shift_sigma` standard deviations of their own
/// cluster along every feature; anomalies move with the first cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub window_size: usize,
    pub start_window: usize,
    pub shift_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub clusters: Vec<ClusterSpec>,
    /// Fraction of anomalous rows, in `[0, 1)`.
    pub anomaly_rate: f64,
    /// One box per anomaly class; anomalies are split evenly between them.
    pub anomaly_boxes: Vec<AnomalyBox>,
    #[serde(default)]
    pub drift: Option<DriftSpec>,
}

impl SynthSpec {
    /// Two nominal clusters of different spread and one anomaly class.
    ///
    /// The anomalies form a clump above the gap between the clusters, so the
    /// tails of the broad cluster compete with them under an unsupervised ranking.
    pub fn two_cluster(n: usize, anomaly_rate: f64) -> Self {
        SynthSpec {
            n,
            clusters: vec![
                ClusterSpec {
                    mean: vec![0.0, 0.0],
                    std: vec![2.0, 2.0],
                    weight: 0.6,
                },
                ClusterSpec {
                    mean: vec![9.0, 0.0],
                    std: vec![0.5, 0.5],
                    weight: 0.4,
                },
            ],
            anomaly_rate,
            anomaly_boxes: vec![AnomalyBox {
                lo: vec![4.0, 4.0],
                hi: vec![6.0, 6.0],
            }],
            drift: None,
        }
    }

    /// The two-cluster layout with three separate anomaly classes.
    pub fn three_anomaly_classes(n: usize, anomaly_rate: f64) -> Self {
        SynthSpec {
            anomaly_boxes: vec![
                AnomalyBox {
                    lo: vec![4.0, 4.0],
                    hi: vec![6.0, 6.0],
                },
                AnomalyBox {
                    lo: vec![4.0, -6.0],
                    hi: vec![6.0, -4.0],
                },
                AnomalyBox {
                    lo: vec![12.0, 2.0],
                    hi: vec![14.0, 4.0],
                },
            ],
            ..SynthSpec::two_cluster(n, anomaly_rate)
        }
    }

    pub fn with_drift(self, drift: DriftSpec) -> Self {
        SynthSpec {
            drift: Some(drift),
            ..self
        }
    }

    pub fn dims(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.mean.len())
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if !(0.0..1.0).contains(&self.anomaly_rate) {
            return bad(format!("anomaly rate {} is outside [0, 1)", self.anomaly_rate));
        }
        if self.n == 0 || self.clusters.is_empty() {
            return bad("need at least one row and one cluster".into());
        }
        let d = self.dims();
        if d == 0 {
            return bad("clusters have zero dimensions".into());
        }
        for c in &self.clusters {
            if c.mean.len() != d || c.std.len() != d || !(c.weight > 0.0) || c.std.iter().any(|s| !(*s >= 0.0)) {
                return bad("cluster shape, weight or spread is invalid".into());
            }
        }
        for b in &self.anomaly_boxes {
            if b.lo.len() != d || b.hi.len() != d || b.lo.iter().zip(&b.hi).any(|(l, h)| !(l <= h)) {
                return bad("anomaly box shape is invalid".into());
            }
        }
        if self.anomaly_rate > 0.0 && self.anomaly_boxes.is_empty() {
            return bad("positive anomaly rate without anomaly boxes".into());
        }
        if let Some(drift) = &self.drift {
            if drift.window_size == 0 {
                return bad("drift window size is zero".into());
            }
        }
        Ok(())
    }

    pub fn anomaly_count(&self) -> usize {
        (self.anomaly_rate * self.n as f64).round() as usize
    }
}

/// Splits `total` into parts proportional to `weights` (largest remainders).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Draws a shuffled dataset. Class tags are `nominal` and `anomaly-<k>`.
pub fn synth_generator(spec: &SynthSpec, seed: u64) -> Result<Dataset<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_anomalies = spec.anomaly_count();
    let weights: Vec<f64> = spec.clusters.iter().map(|c| c.weight).collect();
    let per_cluster = apportion(spec.n - n_anomalies, &weights);
    let per_box = apportion(n_anomalies, &vec![1.0; spec.anomaly_boxes.len().max(1)]);

    // (source, point): source is Ok(cluster) or Err(box).
    let mut rows: Vec<(std::result::Result<usize, usize>, Vec<f64>)> = Vec::with_capacity(spec.n);
    for (c, (cluster, &count)) in spec.clusters.iter().zip(&per_cluster).enumerate() {
        let normals: Vec<Normal<f64>> = cluster
            .mean
            .iter()
            .zip(&cluster.std)
            .map(|(&m, &s)| Normal::new(m, s).expect("spread checked"))
            .collect();
        for _ in 0..count {
            rows.push((Ok(c), normals.iter().map(|nd| nd.sample(&mut rng)).collect()));
        }
    }
    for (k, (bx, &count)) in spec.anomaly_boxes.iter().zip(&per_box).enumerate() {
        for _ in 0..count {
            let x = bx
                .lo
                .iter()
                .zip(&bx.hi)
                .map(|(&lo, &hi)| if lo < hi { rng.random_range(lo..hi) } else { lo })
                .collect();
            rows.push((Err(k), x));
        }
    }
    rows.shuffle(&mut rng);

    if let Some(drift) = &spec.drift {
        for (i, (source, x)) in rows.iter_mut().enumerate() {
            if i / drift.window_size < drift.start_window {
                continue;
            }
            let std = &spec.clusters[source.unwrap_or(0)].std;
            for (v, s) in x.iter_mut().zip(std) {
                *v += drift.shift_sigma * s;
            }
        }
    }

    let labels = rows
        .iter()
        .map(|(s, _)| if s.is_ok() { Label::Nominal } else { Label::Anomaly })
        .collect();
    let tags = rows
        .iter()
        .map(|(s, _)| match s {
            Ok(_) => "nominal".to_string(),
            Err(k) => format!("anomaly-{k}"),
        })
        .collect();
    Ok(Dataset::with_tags(
        rows.into_iter().map(|(_, x)| x).collect(),
        labels,
        Some(tags),
    )?)
}
