use serde::{Deserialize, Serialize};

use super::{Corpus, Split};
use crate::error::{Error, Result};

/// Per-dimension standardization statistics (population variance).
///
/// A zero standard deviation is kept as fitted and treated as 1 when applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Dimensions whose fitted standard deviation is exactly zero.
    pub fn zero_variance(&self) -> Vec<usize> {
        self.std
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    fn divisor(&self, j: usize) -> f64 {
        if self.std[j] == 0.0 {
            1.0
        } else {
            self.std[j]
        }
    }
}

/// Fits mean and standard deviation over every timestamp of every individual
/// whose split is in `splits`.
pub fn fit_scaler(corpus: &Corpus, splits: &[Split]) -> Result<ScalerStats> {
    let members: Vec<_> = corpus
        .individuals()
        .iter()
        .filter(|i| splits.contains(&i.split))
        .collect();
    if members.is_empty() {
        return Err(Error::EmptySplit(format!("{splits:?}")));
    }
    let d = corpus.feature_dim();
    let mut n = 0usize;
    let mut sum = vec![0.0; d];
    for ind in &members {
        for row in ind.features.values.iter_rows() {
            for (s, x) in sum.iter_mut().zip(row) {
                *s += x;
            }
            n += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; d];
    for ind in &members {
        for row in ind.features.values.iter_rows() {
            for j in 0..d {
                let dev = row[j] - mean[j];
                sq[j] += dev * dev;
            }
        }
    }
    let std = sq.iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(ScalerStats { mean, std })
}

/// Returns a copy of `corpus` with every feature standardized; labels are untouched.
pub fn apply_scaler(corpus: &Corpus, stats: &ScalerStats) -> Result<Corpus> {
    if stats.dim() != corpus.feature_dim() || stats.std.len() != stats.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: corpus.feature_dim(),
            found: stats.dim(),
        });
    }
    let divisors: Vec<f64> = (0..stats.dim()).map(|j| stats.divisor(j)).collect();
    Ok(corpus.map_features(|m| {
        let d = m.cols();
        for (k, v) in m.as_mut_slice().iter_mut().enumerate() {
            let j = k % d;
            *v = (*v - stats.mean[j]) / divisors[j];
        }
    }))
}
