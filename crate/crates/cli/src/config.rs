//! Config files (TOML, or JSON by extension) with `--set key=value` overrides.

use std::fs;
use std::path::Path;

use aad_harness::{DataSource, DriftSpec, SynthSpec};
use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use toml::{Table, Value};

/// Reads `path` (or starts empty), applies the overrides in order and expands presets.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Value> {
    let value = match path {
        Some(p) => read(p)?,
        None => Value::Table(Table::new()),
    };
    finish(value, sets)
}

pub fn finish(mut value: Value, sets: &[String]) -> Result<Value> {
    for set in sets {
        apply_override(&mut value, set)?;
    }
    expand_presets(&mut value)?;
    Ok(value)
}

pub fn read(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        Ok(Value::Table(
            text.parse::<Table>()
                .with_context(|| format!("parsing {}", path.display()))?,
        ))
    }
}

/// `a.b.c=v`: `v` is read as a TOML value, or taken as a bare string.
pub fn apply_override(root: &mut Value, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| anyhow!("override {set:?} is not key=value"))?;
    let parsed = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key {key:?} is malformed");
    }
    let mut at = root;
    for part in &parts[..parts.len() - 1] {
        let table = at
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {key:?} descends into a non-table"))?;
        at = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
    }
    at.as_table_mut()
        .ok_or_else(|| anyhow!("override {key:?} descends into a non-table"))?
        .insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Preset {
    #[allow(dead_code)]
    kind: String,
    name: String,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_rate")]
    anomaly_rate: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    drift: Option<DriftSpec>,
}

fn default_n() -> usize {
    2000
}

fn default_rate() -> f64 {
    0.03
}

/// Rewrites `data = { kind = "preset", name = ... }` into a full synthetic source.
fn expand_presets(root: &mut Value) -> Result<()> {
    let Some(data) = root.get_mut("data") else {
        return Ok(());
    };
    if data.get("kind").and_then(Value::as_str) != Some("preset") {
        return Ok(());
    }
    let preset: Preset = data.clone().try_into().context("reading data preset")?;
    let mut spec = match preset.name.as_str() {
        "two-cluster" => SynthSpec::two_cluster(preset.n, preset.anomaly_rate),
        "three-classes" => SynthSpec::three_anomaly_classes(preset.n, preset.anomaly_rate),
        other => bail!("unknown preset {other:?}; expected two-cluster or three-classes"),
    };
    spec.drift = preset.drift;
    *data = Value::try_from(DataSource::Synth {
        spec,
        seed: preset.seed,
    })?;
    Ok(())
}

pub fn parse<T: DeserializeOwned>(value: Value) -> Result<T> {
    value.try_into().map_err(|e| anyhow!("invalid configuration: {e}"))
}
