//! The two-stage protocol: a generic model trained on D_G, then one
//! fine-tuned copy per Test individual, optionally on a DWA-augmented
//! training set, evaluated per individual and combined by late fusion.

mod experiment;
mod fusion;

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{apply_scaler, fit_scaler, Corpus, Individual, ScalerStats, Split};
use crate::dwa::{augment_individual, AugmentationPool, DwaConfig};
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::metrics::{ccc, CccReport, DistanceMetric};
use crate::regressor::{
    forward, init_params, train, Checkpoint, RegressorParams, Target, TrainConfig, TrainTrace,
};
use crate::segmentation::{concat_predictions, segment_series, Segment, SegmentationConfig};

pub use experiment::{
    run_experiment, write_report_csv, Aggregate, ExperimentReport, GridRow, ReportRow, FAILURE_FILE, GRID_FILE,
    REPORT_FILE, SUMMARY_FILE,
};
pub use fusion::{late_fuse, FusionWeights, FUSION_EPSILON};

/// Metric × `n` grid explored by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub metrics: Vec<DistanceMetric>,
    pub n_values: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            metrics: DistanceMetric::ALL.to_vec(),
            n_values: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seg: SegmentationConfig,
    /// Augmentation for single-cell runs; `None` is the plain fine-tuning baseline.
    pub dwa: Option<DwaConfig>,
    pub train_generic: TrainConfig,
    pub train_personal: TrainConfig,
    pub grid: GridConfig,
    /// Each seed reruns the whole protocol; it overrides both train configs' seeds.
    pub seeds: Vec<u64>,
    pub targets: Vec<Target>,
    /// Hidden sizes tried for the generic model, selected on Devel_G.
    pub hidden_dims: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seg: SegmentationConfig::default(),
            dwa: None,
            train_generic: TrainConfig {
                learning_rate: 5e-3,
                max_epochs: 60,
                patience: 8,
                batch: 8,
                ..TrainConfig::default()
            },
            train_personal: TrainConfig {
                learning_rate: 1e-2,
                max_epochs: 60,
                patience: 10,
                batch: 4,
                ..TrainConfig::default()
            },
            grid: GridConfig::default(),
            seeds: vec![0],
            targets: Target::ALL.to_vec(),
            hidden_dims: vec![16, 32, 64],
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.seg.validate()?;
        self.train_generic.validate()?;
        self.train_personal.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.seeds.is_empty() || self.targets.is_empty() || self.hidden_dims.is_empty() {
            return bad("seeds, targets and hidden_dims must be non-empty");
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden sizes must be >= 1");
        }
        if self.grid.n_values.contains(&0) || self.dwa.as_ref().is_some_and(|d| d.n == 0) {
            return bad("augmentation n must be >= 1");
        }
        if self.grid.metrics.is_empty() != self.grid.n_values.is_empty() {
            return bad("grid needs both metrics and n_values, or neither");
        }
        Ok(())
    }

    /// Parses a JSON document; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn generic_train_config(&self, target: Target) -> TrainConfig {
        TrainConfig {
            target,
            ..self.train_generic.clone()
        }
    }

    fn personal_train_config(&self, target: Target) -> TrainConfig {
        TrainConfig {
            target,
            ..self.train_personal.clone()
        }
    }

    /// Same config with both train seeds replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.train_generic.seed = seed;
        cfg.train_personal.seed = seed;
        cfg
    }
}

/// Which part of an individual's series an evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpanKind {
    #[serde(rename = "Train_I")]
    TrainI,
    #[serde(rename = "Devel_I")]
    DevelI,
    Test,
    /// The whole labeled series (D_G individuals).
    Full,
}

impl SpanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanKind::TrainI => "Train_I",
            SpanKind::DevelI => "Devel_I",
            SpanKind::Test => "Test",
            SpanKind::Full => "Full",
        }
    }

    pub fn range(self, individual: &Individual) -> Result<Range<usize>> {
        let span = match self {
            SpanKind::TrainI => individual.train_span(),
            SpanKind::DevelI => individual.devel_span(),
            SpanKind::Test => individual.test_span(),
            SpanKind::Full => Some(0..individual.len()),
        };
        span.ok_or_else(|| Error::NotPersonalizable(individual.id.clone()))
    }
}

impl fmt::Display for SpanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SpanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train_i" | "train" => Ok(SpanKind::TrainI),
            "devel_i" | "devel" => Ok(SpanKind::DevelI),
            "test" => Ok(SpanKind::Test),
            "full" => Ok(SpanKind::Full),
            _ => Err(Error::InvalidConfig(format!("unknown span `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub individual_id: String,
    pub target: Target,
    pub split: SpanKind,
    pub ccc_report: CccReport,
    pub config_fingerprint: String,
}

/// Predictions of one model on one span, reassembled per timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub record: EvaluationRecord,
    /// Absolute timestamps that received a prediction.
    pub indices: Vec<usize>,
    pub predictions: Vec<f64>,
    pub labels: Vec<f64>,
}

/// Fits the scaler on D_G and applies it to the whole corpus.
pub fn standardize(corpus: &Corpus) -> Result<(Corpus, ScalerStats)> {
    let stats = fit_scaler(corpus, &[Split::TrainG, Split::DevelG]).map_err(|e| match e {
        Error::EmptySplit(_) => Error::EmptyGlobalSplit,
        other => other,
    })?;
    Ok((apply_scaler(corpus, &stats)?, stats))
}

fn labeled_segments(ind: &Individual, seg: &SegmentationConfig, span: Range<usize>) -> Result<Vec<Segment>> {
    let segs = segment_series(&ind.features, Some(&ind.labels), seg, span)?;
    if segs.iter().any(|s| !s.is_labeled()) {
        return Err(Error::UnlabeledSpan(ind.id.clone()));
    }
    Ok(segs)
}

/// Result of generic training.
#[derive(Debug, Clone)]
pub struct GenericModel {
    pub checkpoint: Checkpoint,
    pub trace: TrainTrace,
}

/// Trains M_G on Train_G with Devel_G for early stopping, once per hidden
/// size, and keeps the one with the best Devel_G CCC.
///
/// Expects a standardized corpus; the seed is `config.train_generic.seed`.
pub fn train_generic(corpus: &Corpus, config: &ExperimentConfig, target: Target) -> Result<GenericModel> {
    config.validate()?;
    let mut train_ids: Vec<&Individual> = corpus.in_split(Split::TrainG).collect();
    let mut dev_ids: Vec<&Individual> = corpus.in_split(Split::DevelG).collect();
    if train_ids.is_empty() || dev_ids.is_empty() {
        return Err(Error::EmptyGlobalSplit);
    }
    train_ids.sort_by(|a, b| a.id.cmp(&b.id));
    dev_ids.sort_by(|a, b| a.id.cmp(&b.id));
    let collect = |inds: &[&Individual]| -> Result<Vec<Segment>> {
        let mut out = Vec::new();
        for ind in inds {
            out.extend(labeled_segments(ind, &config.seg, 0..ind.labeled_len())?);
        }
        Ok(out)
    };
    let train_set = collect(&train_ids)?;
    let dev_set = collect(&dev_ids)?;

    let train_cfg = config.generic_train_config(target);
    let corpus_fp = corpus.fingerprint();
    let mut best: Option<GenericModel> = None;
    for &h in &config.hidden_dims {
        let init = init_params(corpus.feature_dim(), h, train_cfg.seed)?;
        let (params, trace) = train(&init, &train_set, &dev_set, &train_cfg)?;
        if best.as_ref().is_none_or(|b| trace.best_dev_ccc > b.trace.best_dev_ccc) {
            let fingerprint = Fingerprint::new()
                .str("generic")
                .str(&corpus_fp)
                .u64(config.seg.winlen as u64)
                .u64(config.seg.hop as u64)
                .str(&serde_json::to_string(&train_cfg)?)
                .u64(h as u64)
                .finish();
            best = Some(GenericModel {
                checkpoint: Checkpoint {
                    params,
                    target: Some(target),
                    fingerprint,
                },
                trace,
            });
        }
    }
    Ok(best.expect("hidden_dims validated non-empty"))
}

/// Outcome of fine-tuning one Test individual.
#[derive(Debug, Clone)]
pub struct Personalized {
    pub params: RegressorParams,
    pub devel: EvaluationRecord,
    pub trace: TrainTrace,
    /// Size of the fine-tuning set (Train_I segments plus augmentations).
    pub train_set_size: usize,
    pub train_i_segments: usize,
}

/// Fine-tunes a copy of `generic` on the individual's Train_I segments,
/// replaced by the DWA-augmented set when `config.dwa` is set, with early
/// stopping on Devel_I.
pub fn personalize(
    generic: &RegressorParams,
    individual: &Individual,
    pool: Option<&AugmentationPool>,
    config: &ExperimentConfig,
    target: Target,
) -> Result<Personalized> {
    if individual.split != Split::Test {
        return Err(Error::NotPersonalizable(individual.id.clone()));
    }
    let train_span = SpanKind::TrainI.range(individual)?;
    let devel_span = SpanKind::DevelI.range(individual)?;
    let train_segs = labeled_segments(individual, &config.seg, train_span)?;
    let devel_segs = labeled_segments(individual, &config.seg, devel_span)?;
    if train_segs.is_empty() || devel_segs.is_empty() {
        return Err(Error::EmptyPersonalSplit(individual.id.clone()));
    }
    let train_i_segments = train_segs.len();

    let mut fp = Fingerprint::new();
    fp.str("personal")
        .str(&individual.id)
        .str(target.as_str())
        .f64s(generic.as_slice())
        .str(&serde_json::to_string(&config.seg)?)
        .str(&serde_json::to_string(&config.train_personal)?);

    let train_set = match &config.dwa {
        None => train_segs,
        Some(dwa) => {
            let pool = pool.ok_or(Error::MissingPool)?;
            let mut dwa = dwa.clone();
            dwa.exclude_source_ids.insert(individual.id.clone());
            fp.str(pool.fingerprint()).str(&serde_json::to_string(&dwa)?);
            augment_individual(pool, &train_segs, &dwa)?.combined
        }
    };
    let fingerprint = fp.finish();

    let (params, trace) = train(generic, &train_set, &devel_segs, &config.personal_train_config(target))?;
    let mut devel = evaluate(&params, individual, SpanKind::DevelI, target, &config.seg)?.record;
    devel.config_fingerprint = fingerprint;
    Ok(Personalized {
        params,
        devel,
        trace,
        train_set_size: train_set.len(),
        train_i_segments,
    })
}

/// Predicts every window of `span`, averages overlaps per timestamp and
/// scores the result against the labels with CCC.
pub fn evaluate(
    model: &RegressorParams,
    individual: &Individual,
    span: SpanKind,
    target: Target,
    seg: &SegmentationConfig,
) -> Result<Evaluation> {
    let range = span.range(individual)?;
    if individual.labeled_len() < range.end {
        return Err(Error::UnlabeledSpan(individual.id.clone()));
    }
    let segments = labeled_segments(individual, seg, range)?;
    if segments.is_empty() {
        return Err(Error::EmptySet("evaluation"));
    }
    let preds = segments
        .iter()
        .map(|s| forward(model, &s.frames))
        .collect::<Result<Vec<_>>>()?;
    let merged = concat_predictions(&segments, &preds)?;
    if merged.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("predictions for `{}`", individual.id)));
    }
    let column = match target {
        Target::Valence => &individual.labels.valence,
        Target::Arousal => &individual.labels.arousal,
    };
    let labels: Vec<f64> = merged.indices.iter().map(|&t| column[t]).collect();
    let report = ccc(&merged.values, &labels)?;
    let config_fingerprint = Fingerprint::new()
        .f64s(model.as_slice())
        .u64(seg.winlen as u64)
        .u64(seg.hop as u64)
        .finish();
    Ok(Evaluation {
        record: EvaluationRecord {
            individual_id: individual.id.clone(),
            target,
            split: span,
            ccc_report: report,
            config_fingerprint,
        },
        indices: merged.indices,
        predictions: merged.values,
        labels,
    })
}
