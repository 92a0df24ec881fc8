use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use aad_core::dataset::Dataset;
use aad_core::Label;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// How a CSV file maps onto features and hidden labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Label values treated as anomalies.
    pub anomaly_classes: Vec<String>,
    /// Label values treated as nominal. When empty, every value not listed
    /// as an anomaly class is nominal.
    #[serde(default)]
    pub nominal_classes: Vec<String>,
    /// Columns ignored entirely.
    #[serde(default)]
    pub drop_columns: Vec<String>,
}

impl CsvSchema {
    /// Layout of the public anomaly benchmark files: a `label` column holding
    /// `anomaly` or `nominal`, every other column numeric.
    pub fn anomaly_benchmark() -> Self {
        CsvSchema {
            label_column: "label".into(),
            anomaly_classes: vec!["anomaly".into()],
            nominal_classes: vec!["nominal".into()],
            drop_columns: Vec::new(),
        }
    }

    /// The bundled breast cancer fixture with malignant cases as anomalies.
    pub fn wdbc() -> Self {
        CsvSchema {
            label_column: "diagnosis".into(),
            anomaly_classes: vec!["malignant".into()],
            nominal_classes: vec!["benign".into()],
            drop_columns: Vec::new(),
        }
    }

    fn label_of(&self, value: &str) -> Option<Label> {
        if self.anomaly_classes.iter().any(|c| c == value) {
            Some(Label::Anomaly)
        } else if self.nominal_classes.is_empty() || self.nominal_classes.iter().any(|c| c == value) {
            Some(Label::Nominal)
        } else {
            None
        }
    }
}

/// A loaded file: features, hidden labels, class tags and column names.
#[derive(Debug, Clone)]
pub struct Table {
    pub dataset: Dataset<f64>,
    pub feature_names: Vec<String>,
}

/// Path of the bundled breast cancer fixture (569 rows, 30 features).
pub fn wdbc_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("wdbc.csv")
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Table> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_at =
        headers
            .iter()
            .position(|h| h == schema.label_column)
            .ok_or_else(|| HarnessError::MissingColumn {
                path: path.to_owned(),
                column: schema.label_column.clone(),
            })?;
    let features: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_at && !schema.drop_columns.iter().any(|c| c == &headers[i]))
        .collect();

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut tags = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(label_at).unwrap_or("");
        let label = schema.label_of(raw).ok_or_else(|| HarnessError::UnknownLabel {
            path: path.to_owned(),
            line,
            value: raw.to_owned(),
        })?;
        let row = features
            .iter()
            .map(|&i| {
                let cell = record.get(i).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| HarnessError::NonNumeric {
                        path: path.to_owned(),
                        line,
                        column: headers[i].to_owned(),
                        value: cell.to_owned(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(row);
        labels.push(label);
        tags.push(raw.to_owned());
    }
    if points.is_empty() {
        return Err(HarnessError::EmptyFile { path: path.to_owned() });
    }
    Ok(Table {
        dataset: Dataset::with_tags(points, labels, Some(tags))?,
        feature_names: features.iter().map(|&i| headers[i].to_owned()).collect(),
    })
}

/// Writes features `f0..` and a `class` column holding each row's class tag
/// (`anomaly` or `nominal` when the dataset has none).
///
/// Returns the schema that loads the file back with the same labels and tags.
pub fn write_dataset<W: std::io::Write>(data: &Dataset<f64>, out: W) -> Result<CsvSchema> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.dims()).map(|j| format!("f{j}")).collect();
    header.push("class".into());
    writer.write_record(&header)?;
    let mut anomaly_classes = BTreeSet::new();
    let mut nominal_classes = BTreeSet::new();
    for (i, (x, label)) in data.points().iter().zip(data.hidden_labels()).enumerate() {
        let tag = match data.class_tags() {
            Some(tags) => tags[i].clone(),
            None if label.is_anomaly() => "anomaly".into(),
            None => "nominal".into(),
        };
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(tag.clone());
        writer.write_record(&row)?;
        if label.is_anomaly() {
            anomaly_classes.insert(tag);
        } else {
            nominal_classes.insert(tag);
        }
    }
    writer.flush()?;
    Ok(CsvSchema {
        label_column: "class".into(),
        anomaly_classes: anomaly_classes.into_iter().collect(),
        nominal_classes: nominal_classes.into_iter().collect(),
        drop_columns: Vec::new(),
    })
}

/// Keeps every nominal row and a seeded random subset of anomalies so that
/// anomalies make up about `rate` of the result. Row order is preserved.
///
/// Returns the reduced dataset and the original indices of its rows.
pub fn downsample_anomalies(data: &Dataset<f64>, rate: f64, seed: u64) -> Result<(Dataset<f64>, Vec<usize>)> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(HarnessError::Config(format!("anomaly rate {rate} is outside (0, 1)")));
    }
    let labels = data.hidden_labels();
    let anomalies: Vec<usize> = (0..data.len()).filter(|&i| labels[i].is_anomaly()).collect();
    let nominal = data.len() - anomalies.len();
    let want = ((rate * nominal as f64 / (1.0 - rate)).round() as usize).min(anomalies.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: BTreeSet<usize> = sample(&mut rng, anomalies.len(), want)
        .into_iter()
        .map(|k| anomalies[k])
        .collect();
    let rows: Vec<usize> = (0..data.len())
        .filter(|&i| !labels[i].is_anomaly() || keep.contains(&i))
        .collect();
    Ok((data.select(&rows), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema() -> CsvSchema {
        CsvSchema {
            label_column: "class".into(),
            anomaly_classes: vec!["b".into()],
            nominal_classes: vec!["a".into(), "c".into()],
            drop_columns: vec!["id".into()],
        }
    }

    #[test]
    fn parses_features_and_labels() {
        let f = write("id,x,class,y\n1,0.5,a,2\n2,1.5,b,3\n3,2.5,c,4\n");
        let t = load_dataset(f.path(), &schema()).unwrap();
        assert_eq!(t.feature_names, vec!["x", "y"]);
        assert_eq!(t.dataset.point(1), &[1.5, 3.0]);
        assert_eq!(
            t.dataset.hidden_labels(),
            &[Label::Nominal, Label::Anomaly, Label::Nominal]
        );
        assert_eq!(t.dataset.class_tags().unwrap()[2], "c");
    }

    #[test]
    fn all_classes_anomalous() {
        let f = write("x,class\n1,a\n2,b\n");
        let s = CsvSchema {
            anomaly_classes: vec!["a".into(), "b".into()],
            ..schema()
        };
        let t = load_dataset(f.path(), &s).unwrap();
        assert!(t.dataset.hidden_labels().iter().all(|l| l.is_anomaly()));
    }

    #[test]
    fn rejects_bad_cells() {
        let f = write("x,class\nabc,a\n");
        assert!(matches!(
            load_dataset(f.path(), &schema()),
            Err(HarnessError::NonNumeric { line: 2, .. })
        ));
        let f = write("x,class\n1,z\n");
        assert!(matches!(
            load_dataset(f.path(), &schema()),
            Err(HarnessError::UnknownLabel { .. })
        ));
        let f = write("x,class\n");
        assert!(matches!(
            load_dataset(f.path(), &schema()),
            Err(HarnessError::EmptyFile { .. })
        ));
        let f = write("x,kind\n1,a\n");
        assert!(matches!(
            load_dataset(f.path(), &schema()),
            Err(HarnessError::MissingColumn { .. })
        ));
    }

    #[test]
    fn written_files_load_back() {
        let data = crate::synth::synth_generator(&crate::synth::SynthSpec::three_anomaly_classes(300, 0.1), 4).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        let schema = write_dataset(&data, f.reopen().unwrap()).unwrap();
        assert_eq!(schema.anomaly_classes, ["anomaly-0", "anomaly-1", "anomaly-2"]);
        let back = load_dataset(f.path(), &schema).unwrap();
        assert_eq!(back.dataset, data);
        assert_eq!(back.feature_names, ["f0", "f1"]);
    }

    #[test]
    fn wdbc_fixture_loads() {
        let t = load_dataset(wdbc_fixture(), &CsvSchema::wdbc()).unwrap();
        assert_eq!(t.dataset.len(), 569);
        assert_eq!(t.dataset.dims(), 30);
        assert_eq!(t.dataset.anomaly_count(), 212);
    }

    #[test]
    fn downsampling_hits_rate_and_keeps_order() {
        let t = load_dataset(wdbc_fixture(), &CsvSchema::wdbc()).unwrap();
        let (d, rows) = downsample_anomalies(&t.dataset, 0.03, 7).unwrap();
        assert_eq!(d.len() - d.anomaly_count(), 357);
        // round(0.03 * 357 / 0.97) = 11
        assert_eq!(d.anomaly_count(), 11);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(downsample_anomalies(&t.dataset, 0.03, 7).unwrap().1, rows);
    }
}
