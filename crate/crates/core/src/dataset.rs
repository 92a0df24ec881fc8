//! In-memory tabular data with hidden labels.

use serde::{Deserialize, Serialize};

use crate::error::{AadError, Result};
use crate::scalar::Scalar;

/// Analyst label of an instance: `+1` anomaly, `-1` nominal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Anomaly,
    Nominal,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Anomaly => 1,
            Label::Nominal => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Label> {
        match sign {
            1 => Some(Label::Anomaly),
            -1 => Some(Label::Nominal),
            _ => None,
        }
    }

    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }
}

/// Feature matrix with per-row hidden labels.
///
/// Learners only ever see `points`; `hidden_labels` and `class_tags` are read by
/// oracles and evaluation code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Dataset<S> {
    points: Vec<Vec<S>>,
    hidden_labels: Vec<Label>,
    class_tags: Option<Vec<String>>,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(points: Vec<Vec<S>>, hidden_labels: Vec<Label>) -> Result<Self> {
        Self::with_tags(points, hidden_labels, None)
    }

    pub fn with_tags(points: Vec<Vec<S>>, hidden_labels: Vec<Label>, class_tags: Option<Vec<String>>) -> Result<Self> {
        let dims = points.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = points.iter().find(|p| p.len() != dims) {
            return Err(AadError::DimensionMismatch {
                expected: dims,
                actual: bad.len(),
            });
        }
        if !points.is_empty() && dims == 0 {
            return Err(AadError::ZeroDimensions);
        }
        if hidden_labels.len() != points.len() {
            return Err(AadError::invalid(
                "hidden_labels",
                format!("{} labels for {} points", hidden_labels.len(), points.len()),
            ));
        }
        if let Some(tags) = &class_tags {
            if tags.len() != points.len() {
                return Err(AadError::invalid(
                    "class_tags",
                    format!("{} tags for {} points", tags.len(), points.len()),
                ));
            }
        }
        Ok(Dataset {
            points,
            hidden_labels,
            class_tags,
        })
    }

    /// Unlabeled points; every hidden label is nominal.
    pub fn unlabeled(points: Vec<Vec<S>>) -> Result<Self> {
        let labels = vec![Label::Nominal; points.len()];
        Self::new(points, labels)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.points.first().map(Vec::len).unwrap_or(0)
    }

    pub fn points(&self) -> &[Vec<S>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[S] {
        &self.points[i]
    }

    pub fn hidden_labels(&self) -> &[Label] {
        &self.hidden_labels
    }

    pub fn class_tags(&self) -> Option<&[String]> {
        self.class_tags.as_deref()
    }

    pub fn anomaly_count(&self) -> usize {
        self.hidden_labels.iter().filter(|l| l.is_anomaly()).count()
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            hidden_labels: indices.iter().map(|&i| self.hidden_labels[i]).collect(),
            class_tags: self
                .class_tags
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i].clone()).collect()),
        }
    }

    /// Consecutive row blocks of at most `size` rows, in original order.
    pub fn windows(&self, size: usize) -> Vec<Self> {
        let size = size.max(1);
        (0..self.len())
            .step_by(size)
            .map(|start| {
                let idx: Vec<usize> = (start..(start + size).min(self.len())).collect();
                self.select(&idx)
            })
            .collect()
    }

    /// Per-feature `(min, max)` over all rows.
    pub fn feature_ranges(&self) -> Vec<(S, S)> {
        feature_ranges(self.points.iter().map(Vec::as_slice), self.dims())
    }
}

pub(crate) fn feature_ranges<'a, S: Scalar>(rows: impl Iterator<Item = &'a [S]>, dims: usize) -> Vec<(S, S)> {
    let mut ranges = vec![(S::infinity(), S::neg_infinity()); dims];
    for row in rows {
        for (r, &v) in ranges.iter_mut().zip(row) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    }
    ranges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        let err = Dataset::<f64>::unlabeled(vec![vec![1.0, 2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, AadError::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_zero_dims() {
        let err = Dataset::<f64>::unlabeled(vec![vec![], vec![]]).unwrap_err();
        assert!(matches!(err, AadError::ZeroDimensions));
    }

    #[test]
    fn windows_cover_rows_in_order() {
        let d = Dataset::<f64>::unlabeled((0..7).map(|i| vec![i as f64]).collect()).unwrap();
        let w = d.windows(3);
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].points(), &[vec![6.0]]);
    }

    #[test]
    fn ranges() {
        let d = Dataset::<f64>::unlabeled(vec![vec![1.0, -2.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(d.feature_ranges(), vec![(1.0, 3.0), (-2.0, 5.0)]);
    }
}
