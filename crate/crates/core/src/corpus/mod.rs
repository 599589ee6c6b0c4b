//! Dataset model: individuals, their split membership and aligned
//! feature/label series.

mod io;
mod scaler;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::matrix::Matrix;

pub use io::{load_corpus, save_corpus, MANIFEST_FILE};
pub use scaler::{apply_scaler, fit_scaler, ScalerStats};
pub use synth::{generate_synthetic, StyleMap, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    TrainG,
    DevelG,
    Test,
}

impl Split {
    /// Member of the global partition D_G.
    pub fn is_global(self) -> bool {
        matches!(self, Split::TrainG | Split::DevelG)
    }
}

/// Per-timestamp feature vectors of one individual (rows are timestamps).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub individual_id: String,
    pub values: Matrix,
    /// Seconds per timestamp.
    pub sample_period: f64,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }
}

/// Valence and arousal targets aligned with a [`FeatureSeries`].
///
/// The series may be shorter than its features when the tail is unlabeled
/// (Test individuals of a real challenge corpus).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeries {
    pub individual_id: String,
    pub valence: Vec<f64>,
    pub arousal: Vec<f64>,
}

impl LabelSeries {
    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }
}

/// Boundaries of the Train_I / Devel_I / Test spans of a Test individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portions {
    pub train_end: usize,
    pub devel_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: String,
    pub split: Split,
    pub features: FeatureSeries,
    pub labels: LabelSeries,
    pub portions: Option<Portions>,
}

impl Individual {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Number of leading timestamps that carry labels.
    pub fn labeled_len(&self) -> usize {
        self.labels.len()
    }

    pub fn train_span(&self) -> Option<Range<usize>> {
        self.portions.map(|p| 0..p.train_end)
    }

    pub fn devel_span(&self) -> Option<Range<usize>> {
        self.portions.map(|p| p.train_end..p.devel_end)
    }

    pub fn test_span(&self) -> Option<Range<usize>> {
        self.portions.map(|p| p.devel_end..self.len())
    }

    fn validate(&self, feature_dim: usize, sample_period: f64) -> Result<()> {
        let t = self.len();
        if t == 0 {
            return Err(Error::InvalidDims(format!("`{}` has an empty series", self.id)));
        }
        if self.features.dim() != feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim,
                found: self.features.dim(),
            });
        }
        if self.features.sample_period != sample_period {
            return Err(Error::InvalidConfig(format!(
                "`{}` has sample period {} (corpus uses {})",
                self.id, self.features.sample_period, sample_period
            )));
        }
        if !self.features.values.is_finite() {
            return Err(Error::NonFinite(format!("features of `{}`", self.id)));
        }
        if self.labels.valence.len() != self.labels.arousal.len() {
            return Err(Error::LengthMismatch {
                left: self.labels.valence.len(),
                right: self.labels.arousal.len(),
            });
        }
        if self
            .labels
            .valence
            .iter()
            .chain(&self.labels.arousal)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(format!("labels of `{}`", self.id)));
        }
        if self.labeled_len() > t {
            return Err(Error::LengthMismatch {
                left: t,
                right: self.labeled_len(),
            });
        }
        match (self.split, self.portions) {
            (Split::Test, Some(p)) => {
                let bad = |reason: String| Error::PortionOutOfRange {
                    id: self.id.clone(),
                    reason,
                };
                if !(0 < p.train_end && p.train_end < p.devel_end && p.devel_end <= t) {
                    return Err(bad(format!(
                        "need 0 < train_end ({}) < devel_end ({}) <= length ({t})",
                        p.train_end, p.devel_end
                    )));
                }
                if self.labeled_len() < p.devel_end {
                    return Err(bad(format!(
                        "labels cover {} timestamps, devel_end is {}",
                        self.labeled_len(),
                        p.devel_end
                    )));
                }
            }
            (Split::Test, None) => {
                return Err(Error::PortionOutOfRange {
                    id: self.id.clone(),
                    reason: "Test individual without portion boundaries".into(),
                })
            }
            (_, Some(_)) => {
                return Err(Error::PortionOutOfRange {
                    id: self.id.clone(),
                    reason: "portion boundaries are only valid for Test individuals".into(),
                })
            }
            (_, None) => {
                if self.labeled_len() != t {
                    return Err(Error::LengthMismatch {
                        left: t,
                        right: self.labeled_len(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    individuals: Vec<Individual>,
    feature_dim: usize,
    sample_period: f64,
    metadata: BTreeMap<String, String>,
}

impl Corpus {
    /// Validates and assembles a corpus. Individuals keep their given order.
    pub fn new(
        individuals: Vec<Individual>,
        feature_dim: usize,
        sample_period: f64,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::InvalidDims("feature dimension must be >= 1".into()));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        let mut seen = HashSet::new();
        for ind in &individuals {
            if !seen.insert(ind.id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate individual id `{}`", ind.id)));
            }
            ind.validate(feature_dim, sample_period)?;
        }
        Ok(Corpus {
            individuals,
            feature_dim,
            sample_period,
            metadata,
        })
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn get(&self, id: &str) -> Option<&Individual> {
        self.individuals.iter().find(|i| i.id == id)
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Individual> + '_ {
        self.individuals.iter().filter(move |i| i.split == split)
    }

    /// D_G sorted by id.
    pub fn global(&self) -> Vec<&Individual> {
        let mut v: Vec<_> = self.individuals.iter().filter(|i| i.split.is_global()).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// D_I (Test individuals) sorted by id.
    pub fn targets(&self) -> Vec<&Individual> {
        let mut v: Vec<_> = self.in_split(Split::Test).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Keeps only feature columns in `cols`, e.g. to split one corpus into
    /// two feature sets.
    pub fn select_features(&self, cols: Range<usize>) -> Result<Corpus> {
        if cols.start >= cols.end || cols.end > self.feature_dim {
            return Err(Error::InvalidDims(format!(
                "column range {cols:?} invalid for dimension {}",
                self.feature_dim
            )));
        }
        let individuals = self
            .individuals
            .iter()
            .map(|ind| {
                let mut ind = ind.clone();
                ind.features.values = ind.features.values.slice_cols(cols.start, cols.end);
                ind
            })
            .collect();
        let mut metadata = self.metadata.clone();
        metadata.insert("feature_columns".into(), format!("{}..{}", cols.start, cols.end));
        Corpus::new(individuals, cols.end - cols.start, self.sample_period, metadata)
    }

    /// Content hash over ids, splits, portions and all values.
    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new();
        fp.u64(self.feature_dim as u64).f64s(&[self.sample_period]);
        for ind in &self.individuals {
            fp.str(&ind.id).u64(ind.split as u64);
            if let Some(p) = ind.portions {
                fp.u64(p.train_end as u64).u64(p.devel_end as u64);
            }
            fp.f64s(ind.features.values.as_slice())
                .f64s(&ind.labels.valence)
                .f64s(&ind.labels.arousal);
        }
        fp.finish()
    }

    pub(crate) fn map_features(&self, f: impl Fn(&mut Matrix)) -> Corpus {
        let individuals = self
            .individuals
            .iter()
            .map(|ind| {
                let mut ind = ind.clone();
                f(&mut ind.features.values);
                ind
            })
            .collect();
        Corpus {
            individuals,
            feature_dim: self.feature_dim,
            sample_period: self.sample_period,
            metadata: self.metadata.clone(),
        }
    }
}
