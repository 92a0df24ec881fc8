use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnsembleModel;
use crate::error::{AadError, Result};
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "aad-ensemble";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk envelope for a model. Encoded as JSON; floats use shortest
/// round-trip formatting, so a save/load cycle reproduces the model exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ModelFile<S> {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub model: EnsembleModel<S>,
}

impl<S: Scalar> ModelFile<S> {
    pub fn wrap(model: EnsembleModel<S>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            scalar: std::any::type_name::<S>().to_string(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile<S> = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(AadError::Format(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(AadError::Format(format!("unsupported version {}", file.version)));
        }
        if file.scalar != std::any::type_name::<S>() {
            return Err(AadError::Format(format!(
                "file stores `{}` scalars, expected `{}`",
                file.scalar,
                std::any::type_name::<S>()
            )));
        }
        file.model.validate()?;
        Ok(file)
    }
}

pub fn save_model<S: Scalar>(model: &EnsembleModel<S>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ModelFile::wrap(model.clone()).to_json()?)?;
    Ok(())
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<EnsembleModel<S>> {
    Ok(ModelFile::from_json(&fs::read_to_string(path)?)?.model)
}
