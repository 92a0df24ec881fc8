//! Per-query session records and their CSV forms.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Label;
use crate::error::Result;
use crate::scalar::Scalar;

pub const SESSION_LOG_HEADER: &str = "iter,instance_id,score,label,cum_anomalies";
pub const DRIFT_REPORT_HEADER: &str = "window_index,n_drifted,n_replaced,q_kl";

/// Hex SHA-256 of the weights as little-endian `f64` bytes.
pub fn weight_hash<S: Scalar>(w: &[S]) -> String {
    let mut hasher = Sha256::new();
    for v in w {
        hasher.update(v.as_f64().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// 1-based query counter.
    pub iter: usize,
    pub instance_id: usize,
    /// Score under the weights in force when the query was issued.
    pub score: f64,
    pub label: Label,
    pub cum_anomalies: usize,
    /// Hash of the weights the query was selected under.
    pub weight_hash: String,
    /// 0-based feedback batch.
    pub batch: usize,
    /// Stream window the query was issued in.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub window_index: usize,
    pub n_drifted: usize,
    pub n_replaced: usize,
    pub q_kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub queries: Vec<QueryRecord>,
    pub drift: Vec<DriftReport>,
    /// Weights before every query, only when snapshots were requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight_snapshots: Vec<Vec<f64>>,
}

impl SessionLog {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn anomalies_found(&self) -> usize {
        self.queries.last().map_or(0, |r| r.cum_anomalies)
    }

    pub fn queried_ids(&self) -> Vec<usize> {
        self.queries.iter().map(|r| r.instance_id).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SESSION_LOG_HEADER}")?;
        for r in &self.queries {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iter,
                r.instance_id,
                r.score,
                r.label.sign(),
                r.cum_anomalies
            )?;
        }
        Ok(())
    }

    pub fn write_drift_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DRIFT_REPORT_HEADER}")?;
        for d in &self.drift {
            writeln!(out, "{},{},{},{}", d.window_index, d.n_drifted, d.n_replaced, d.q_kl)?;
        }
        Ok(())
    }
}
