use aad_core::dataset::Dataset;
use aad_core::learner::LabelOracle;
use aad_core::{AadError, Label};

/// Answers queries from a dataset's hidden labels and counts the calls.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    labels: Vec<Label>,
    calls: usize,
}

impl SimulatedOracle {
    pub fn new<S: aad_core::Scalar>(data: &Dataset<S>) -> Self {
        SimulatedOracle {
            labels: data.hidden_labels().to_vec(),
            calls: 0,
        }
    }

    pub fn from_labels(labels: Vec<Label>) -> Self {
        SimulatedOracle { labels, calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl LabelOracle for SimulatedOracle {
    fn label(&mut self, id: usize) -> aad_core::Result<Label> {
        let label = self.labels.get(id).copied().ok_or_else(|| AadError::Oracle {
            id,
            reason: "unknown instance id".into(),
        })?;
        self.calls += 1;
        Ok(label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_hidden_labels_and_counts() {
        let mut o = SimulatedOracle::from_labels(vec![Label::Anomaly, Label::Nominal]);
        assert_eq!(o.label(0).unwrap(), Label::Anomaly);
        assert_eq!(o.label(1).unwrap(), Label::Nominal);
        assert!(o.label(2).is_err());
        assert_eq!(o.calls(), 2);
    }
}
