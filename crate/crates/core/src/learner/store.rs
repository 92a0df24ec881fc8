use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::ensemble::SparseScoreVector;
use crate::error::{AadError, Result};
use crate::scalar::Scalar;

/// Score vectors of instances the analyst has labeled, split by label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LabeledStore<S> {
    positives: Vec<(usize, SparseScoreVector<S>)>,
    negatives: Vec<(usize, SparseScoreVector<S>)>,
}

impl<S: Scalar> LabeledStore<S> {
    pub fn new() -> Self {
        LabeledStore {
            positives: Vec::new(),
            negatives: Vec::new(),
        }
    }

    pub fn insert(&mut self, id: usize, z: SparseScoreVector<S>, label: Label) -> Result<()> {
        if self.contains(id) {
            return Err(AadError::AlreadyLabeled(id));
        }
        match label {
            Label::Anomaly => self.positives.push((id, z)),
            Label::Nominal => self.negatives.push((id, z)),
        }
        Ok(())
    }

    pub fn contains(&self, id: usize) -> bool {
        self.positives.iter().chain(&self.negatives).any(|(i, _)| *i == id)
    }

    pub fn label_of(&self, id: usize) -> Option<Label> {
        if self.positives.iter().any(|(i, _)| *i == id) {
            Some(Label::Anomaly)
        } else if self.negatives.iter().any(|(i, _)| *i == id) {
            Some(Label::Nominal)
        } else {
            None
        }
    }

    pub fn positives(&self) -> &[(usize, SparseScoreVector<S>)] {
        &self.positives
    }

    pub fn negatives(&self) -> &[(usize, SparseScoreVector<S>)] {
        &self.negatives
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All labeled vectors with their labels, positives first.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &SparseScoreVector<S>, Label)> {
        self.positives
            .iter()
            .map(|(i, z)| (*i, z, Label::Anomaly))
            .chain(self.negatives.iter().map(|(i, z)| (*i, z, Label::Nominal)))
    }

    /// Replaces every stored vector, e.g. after the model's leaves changed.
    pub fn retransform(&mut self, mut f: impl FnMut(usize) -> Result<SparseScoreVector<S>>) -> Result<()> {
        for (id, z) in self.positives.iter_mut().chain(self.negatives.iter_mut()) {
            *z = f(*id)?;
        }
        Ok(())
    }
}
