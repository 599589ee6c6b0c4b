//! Deterministic synthetic corpora.
//!
//! Each individual follows one of `n_styles` latent styles. Labels are
//! smooth random walks reflected at ±1, nuisance latents are independent
//! walks of the same kind, and features are an affine map of
//! `[valence, arousal, nuisance...]` plus Gaussian noise. The map is shared
//! across styles up to a style-specific perturbation and offset, so
//! individuals of one style produce mutually near segments.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Corpus, FeatureSeries, Individual, LabelSeries, Portions, Split};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_train_g: usize,
    pub n_devel_g: usize,
    pub n_test: usize,
    pub len_train_g: usize,
    pub len_devel_g: usize,
    pub len_test: usize,
    pub feature_dim: usize,
    pub sample_period: f64,
    pub n_styles: usize,
    pub n_nuisance: usize,
    pub noise: f64,
    /// Scale of the per-style perturbation of the shared mixing matrix.
    pub style_spread: f64,
    /// Scale of the per-style feature offset.
    pub style_offset: f64,
    /// Scale of the per-individual perturbation of the mixing matrix.
    pub individual_spread: f64,
    /// Scale of the per-individual feature offset.
    pub individual_offset: f64,
    /// Standard deviation of one random-walk step.
    pub label_step: f64,
    /// Exponential smoothing half-life, in timestamps.
    pub label_half_life: f64,
    /// Train_I length for Test individuals; defaults to `len_test / 5`.
    pub train_len_test: Option<usize>,
    /// Devel_I length for Test individuals; defaults to `len_test / 5`.
    pub devel_len_test: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train_g: 12,
            n_devel_g: 4,
            n_test: 6,
            len_train_g: 200,
            len_devel_g: 200,
            len_test: 200,
            feature_dim: 6,
            sample_period: 0.5,
            n_styles: 3,
            n_nuisance: 2,
            noise: 0.1,
            style_spread: 0.6,
            style_offset: 1.0,
            individual_spread: 0.2,
            individual_offset: 0.5,
            label_step: 0.15,
            label_half_life: 4.0,
            train_len_test: None,
            devel_len_test: None,
        }
    }
}

impl SynthConfig {
    /// Single style, no nuisance, no noise: labels are an exact linear
    /// function of the features.
    pub fn toy() -> Self {
        SynthConfig {
            n_styles: 1,
            n_nuisance: 0,
            noise: 0.0,
            style_spread: 0.0,
            style_offset: 0.0,
            individual_spread: 0.0,
            individual_offset: 0.0,
            feature_dim: 4,
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_train_g == 0 || self.n_devel_g == 0 || self.n_test == 0 {
            return bad("individual counts must be >= 1");
        }
        if self.len_train_g == 0 || self.len_devel_g == 0 || self.len_test == 0 {
            return bad("series lengths must be >= 1");
        }
        if self.feature_dim == 0 || self.n_styles == 0 {
            return bad("feature_dim and n_styles must be >= 1");
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return bad("sample_period must be positive");
        }
        let scales = [
            self.noise,
            self.style_spread,
            self.style_offset,
            self.individual_spread,
            self.individual_offset,
            self.label_step,
        ];
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise and scale parameters must be finite and >= 0");
        }
        if !(self.label_half_life.is_finite() && self.label_half_life >= 0.0) {
            return bad("label_half_life must be >= 0");
        }
        let p = self.portions();
        if !(0 < p.train_end && p.train_end < p.devel_end && p.devel_end <= self.len_test) {
            return bad("Test portions must satisfy 0 < train_end < devel_end <= len_test");
        }
        Ok(())
    }

    fn portions(&self) -> Portions {
        let fifth = self.len_test / 5;
        let train = self.train_len_test.unwrap_or(fifth);
        let devel = self.devel_len_test.unwrap_or(fifth);
        Portions {
            train_end: train,
            devel_end: train + devel,
        }
    }
}

/// Affine generative map from latents `[valence, arousal, nuisance...]` to features.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleMap {
    /// `d × (2 + n_nuisance)`.
    pub mixing: Matrix,
    pub offset: Vec<f64>,
}

impl StyleMap {
    /// Noiseless features for the given latent paths. `nuisance` is `T × n_nuisance`.
    pub fn render(&self, valence: &[f64], arousal: &[f64], nuisance: &Matrix) -> Matrix {
        let d = self.mixing.rows();
        let t = valence.len();
        let mut out = Matrix::zeros(t, d);
        let mut latent = vec![0.0; self.mixing.cols()];
        for i in 0..t {
            latent[0] = valence[i];
            latent[1] = arousal[i];
            latent[2..].copy_from_slice(nuisance.row(i));
            let row = out.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                let w = self.mixing.row(j);
                *x = self.offset[j] + w.iter().zip(&latent).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        out
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * gaussian(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn reflect(mut u: f64) -> f64 {
    loop {
        if u > 1.0 {
            u = 2.0 - u;
        } else if u < -1.0 {
            u = -2.0 - u;
        } else {
            return u;
        }
    }
}

/// Random walk reflected into [-1, 1], then exponentially smoothed.
fn smooth_walk(rng: &mut ChaCha8Rng, len: usize, step: f64, half_life: f64) -> Vec<f64> {
    let keep = if half_life > 0.0 { 0.5f64.powf(1.0 / half_life) } else { 0.0 };
    let mut raw: f64 = rng.random_range(-0.5..0.5);
    let mut smooth = raw;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(smooth);
        raw = reflect(raw + step * gaussian(rng));
        smooth = keep * smooth + (1.0 - keep) * raw;
    }
    out
}

/// Generates a corpus that is a pure function of `(config, seed)`.
///
/// Individuals are named `train_NNN`, `devel_NNN` and `test_NNN`; style
/// `k mod n_styles` goes to the `k`-th individual in that order, so every
/// style present among Test individuals also occurs in D_G whenever
/// `n_styles <= n_train_g + n_devel_g`.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.feature_dim;
    let m = 2 + config.n_nuisance;
    let base_scale = 1.0 / (m as f64).sqrt();

    let base = gaussian_matrix(&mut rng, d, m, base_scale);
    let styles: Vec<(Matrix, Vec<f64>)> = (0..config.n_styles)
        .map(|_| {
            let pert = gaussian_matrix(&mut rng, d, m, base_scale);
            let offset = (0..d).map(|_| gaussian(&mut rng)).collect();
            (pert, offset)
        })
        .collect();

    let groups = [
        (Split::TrainG, "train", config.n_train_g, config.len_train_g),
        (Split::DevelG, "devel", config.n_devel_g, config.len_devel_g),
        (Split::Test, "test", config.n_test, config.len_test),
    ];
    let mut individuals = Vec::new();
    let mut k = 0usize;
    for (split, prefix, count, len) in groups {
        for i in 0..count {
            let id = format!("{prefix}_{i:03}");
            let (style_pert, style_off) = &styles[k % config.n_styles];
            k += 1;

            let ind_pert = gaussian_matrix(&mut rng, d, m, base_scale);
            let ind_off: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
            let mixing_data = (0..d * m)
                .map(|e| {
                    base.as_slice()[e]
                        + config.style_spread * style_pert.as_slice()[e]
                        + config.individual_spread * ind_pert.as_slice()[e]
                })
                .collect();
            let map = StyleMap {
                mixing: Matrix::from_vec(d, m, mixing_data)?,
                offset: (0..d)
                    .map(|j| config.style_offset * style_off[j] + config.individual_offset * ind_off[j])
                    .collect(),
            };

            let valence = smooth_walk(&mut rng, len, config.label_step, config.label_half_life);
            let arousal = smooth_walk(&mut rng, len, config.label_step, config.label_half_life);
            let mut nuisance = Matrix::zeros(len, config.n_nuisance);
            for c in 0..config.n_nuisance {
                let path = smooth_walk(&mut rng, len, config.label_step, config.label_half_life);
                for (t, v) in path.into_iter().enumerate() {
                    nuisance.row_mut(t)[c] = v;
                }
            }
            let mut values = map.render(&valence, &arousal, &nuisance);
            if config.noise > 0.0 {
                for v in values.as_mut_slice() {
                    *v += config.noise * gaussian(&mut rng);
                }
            }

            individuals.push(Individual {
                features: FeatureSeries {
                    individual_id: id.clone(),
                    values,
                    sample_period: config.sample_period,
                },
                labels: LabelSeries {
                    individual_id: id.clone(),
                    valence,
                    arousal,
                },
                portions: (split == Split::Test).then(|| config.portions()),
                id,
                split,
            });
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("generator".into(), "synthetic".into());
    metadata.insert("seed".into(), seed.to_string());
    metadata.insert("config".into(), serde_json::to_string(config)?);
    Corpus::new(individuals, d, config.sample_period, metadata)
}
