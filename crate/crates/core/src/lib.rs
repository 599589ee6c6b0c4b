//! Distance weighting augmentation (DWA) for personalized continuous
//! valence/arousal regression.
//!
//! The crate is organised the way the protocol runs:
//!
//! * [`corpus`]: individuals, splits and feature/label series, CSV corpus
//!   directories, a deterministic synthetic generator and feature scaling.
//! * [`segmentation`]: fixed-length windows over a series and reassembly of
//!   per-window predictions.
//! * [`metrics`]: the three segment distances and the concordance
//!   correlation coefficient (CCC) with its loss.
//! * [`dwa`]: the augmentation pool and nearest-`n` selection per target
//!   segment.
//! * [`regressor`]: a gated recurrent regressor trained on CCC loss.
//! * [`pipeline`]: generic training, personalization, evaluation, late
//!   fusion and the experiment grid.

pub mod corpus;
pub mod dwa;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod regressor;
pub mod segmentation;

mod fingerprint;

pub use corpus::{
    Corpus, FeatureSeries, Individual, LabelSeries, Portions, ScalerStats, Split, SynthConfig,
};
pub use dwa::{AugmentationPool, AugmentedDataset, DwaConfig, Selection};
pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
pub use metrics::{CccReport, DistanceMetric};
pub use pipeline::{EvaluationRecord, ExperimentConfig, FusionWeights, SpanKind};
pub use regressor::{RegressorParams, Target, TrainConfig, TrainTrace};
pub use segmentation::{Segment, SegmentationConfig};
