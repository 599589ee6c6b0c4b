//! Corpus directory layout:
//!
//! ```text
//! <root>/manifest.json
//! <root>/features/<id>.csv   timestamp,f0,...,f{d-1}
//! <root>/labels/<id>.csv     timestamp,valence,arousal
//! ```
//!
//! Timestamps are seconds, strictly increasing with uniform spacing equal to
//! the sample period. A Test individual's label file may stop early (the
//! unlabeled tail) but must cover at least `devel_end` rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, FeatureSeries, Individual, LabelSeries, Portions, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    feature_dim: usize,
    sample_period: f64,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    individuals: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    split: Split,
    features: String,
    labels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    portions: Option<Portions>,
}

pub fn load_corpus(root: &Path) -> Result<Corpus> {
    let manifest_path = root.join(MANIFEST_FILE);
    let text = read_required(&manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(&manifest_path, e.line() as u64, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let d = manifest.feature_dim;
    let period = manifest.sample_period;
    if d == 0 || !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidConfig(
            "manifest needs feature_dim >= 1 and a positive sample_period".into(),
        ));
    }

    let mut individuals = Vec::with_capacity(manifest.individuals.len());
    for entry in manifest.individuals {
        let feat_path = root.join(&entry.features);
        let (timestamps, values) = read_features(&feat_path, d, period)?;
        let label_path = root.join(&entry.labels);
        let (valence, arousal) = read_labels(&label_path, &timestamps, period)?;

        if entry.split != Split::Test && valence.len() != values.rows() {
            return Err(Error::malformed(
                &label_path,
                valence.len() as u64 + 2,
                format!("expected {} label rows, found {}", values.rows(), valence.len()),
            ));
        }
        individuals.push(Individual {
            features: FeatureSeries {
                individual_id: entry.id.clone(),
                values,
                sample_period: period,
            },
            labels: LabelSeries {
                individual_id: entry.id.clone(),
                valence,
                arousal,
            },
            id: entry.id,
            split: entry.split,
            portions: entry.portions,
        });
    }
    Corpus::new(individuals, d, period, manifest.metadata)
}

pub fn save_corpus(corpus: &Corpus, root: &Path) -> Result<()> {
    fs::create_dir_all(root.join("features"))?;
    fs::create_dir_all(root.join("labels"))?;
    let period = corpus.sample_period();
    let mut entries = Vec::with_capacity(corpus.individuals().len());
    for ind in corpus.individuals() {
        let features = format!("features/{}.csv", ind.id);
        let labels = format!("labels/{}.csv", ind.id);

        let mut w = csv::Writer::from_path(root.join(&features))?;
        let mut header = vec!["timestamp".to_string()];
        header.extend((0..corpus.feature_dim()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for (i, row) in ind.features.values.iter_rows().enumerate() {
            let mut rec = vec![(i as f64 * period).to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(root.join(&labels))?;
        w.write_record(["timestamp", "valence", "arousal"])?;
        for (i, (v, a)) in ind.labels.valence.iter().zip(&ind.labels.arousal).enumerate() {
            w.write_record(&[(i as f64 * period).to_string(), v.to_string(), a.to_string()])?;
        }
        w.flush()?;

        entries.push(ManifestEntry {
            id: ind.id.clone(),
            split: ind.split,
            features,
            labels,
            portions: ind.portions,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        feature_dim: corpus.feature_dim(),
        sample_period: period,
        metadata: corpus.metadata().clone(),
        individuals: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(root.join(MANIFEST_FILE), text)?;
    Ok(())
}

fn read_required(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path.into())),
        Err(e) => Err(e.into()),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.into()));
    }
    Ok(csv::ReaderBuilder::new().flexible(true).from_path(path)?)
}

fn parse_num(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::malformed(path, line, format!("not a number: `{field}`")))?;
    if !v.is_finite() {
        return Err(Error::malformed(path, line, "non-finite value"));
    }
    Ok(v)
}

fn spacing_ok(t: f64, expected: f64, period: f64) -> bool {
    (t - expected).abs() <= 1e-6 * period.max(expected.abs()).max(1.0)
}

fn read_features(path: &Path, d: usize, period: f64) -> Result<(Vec<f64>, Matrix)> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers()?.clone();
    if header.len() != d + 1 {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: header.len().saturating_sub(1),
        });
    }
    if header.get(0) != Some("timestamp") {
        return Err(Error::malformed(path, 1, "first column must be `timestamp`"));
    }
    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: record.len().saturating_sub(1),
            });
        }
        let t = parse_num(path, line, &record[0])?;
        if let Some(&t0) = timestamps.first() {
            let expected = t0 + timestamps.len() as f64 * period;
            if !spacing_ok(t, expected, period) {
                return Err(Error::malformed(
                    path,
                    line,
                    format!("timestamp {t} breaks uniform spacing (expected {expected})"),
                ));
            }
        }
        timestamps.push(t);
        for field in record.iter().skip(1) {
            data.push(parse_num(path, line, field)?);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::malformed(path, 2, "no data rows"));
    }
    let values = Matrix::from_vec(timestamps.len(), d, data)?;
    Ok((timestamps, values))
}

fn read_labels(path: &Path, timestamps: &[f64], period: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["timestamp", "valence", "arousal"] {
        return Err(Error::malformed(path, 1, "header must be `timestamp,valence,arousal`"));
    }
    let mut valence = Vec::new();
    let mut arousal = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::malformed(path, line, format!("expected 3 fields, found {}", record.len())));
        }
        let i = valence.len();
        let t = parse_num(path, line, &record[0])?;
        match timestamps.get(i) {
            Some(&expected) if spacing_ok(t, expected, period) => {}
            Some(&expected) => {
                return Err(Error::malformed(
                    path,
                    line,
                    format!("timestamp {t} does not match feature timestamp {expected}"),
                ))
            }
            None => return Err(Error::malformed(path, line, "more label rows than feature rows")),
        }
        let v = parse_num(path, line, &record[1])?;
        let a = parse_num(path, line, &record[2])?;
        if !(-1.0..=1.0).contains(&v) || !(-1.0..=1.0).contains(&a) {
            return Err(Error::malformed(path, line, "labels must lie in [-1, 1]"));
        }
        valence.push(v);
        arousal.push(a);
    }
    Ok((valence, arousal))
}
