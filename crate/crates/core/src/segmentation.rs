//! Fixed-length windows over a series, and reassembly of per-window
//! predictions into a per-timestamp sequence.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureSeries, LabelSeries};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Timestamps per segment.
    pub winlen: usize,
    pub hop: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { winlen: 10, hop: 5 }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.winlen == 0 || self.hop == 0 {
            return Err(Error::InvalidConfig(format!(
                "winlen and hop must be >= 1 (got {}, {})",
                self.winlen, self.hop
            )));
        }
        Ok(())
    }

    /// Number of full windows in a span of `len` timestamps.
    pub fn count(&self, len: usize) -> usize {
        if len < self.winlen {
            0
        } else {
            (len - self.winlen) / self.hop + 1
        }
    }
}

/// `winlen` consecutive frames of one individual, with labels when the
/// whole window is labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub source_id: String,
    pub start_index: usize,
    /// `winlen × d`.
    pub frames: Matrix,
    /// `winlen × 2`, columns valence then arousal.
    pub label_frames: Option<Matrix>,
}

impl Segment {
    pub fn winlen(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn is_labeled(&self) -> bool {
        self.label_frames.is_some()
    }

    /// Label column `col` (0 = valence, 1 = arousal), if labeled.
    pub fn label_column(&self, col: usize) -> Option<Vec<f64>> {
        self.label_frames
            .as_ref()
            .map(|m| m.iter_rows().map(|r| r[col]).collect())
    }

    pub fn end_index(&self) -> usize {
        self.start_index + self.winlen()
    }
}

/// Cuts `span` of a series into windows starting at `span.start`,
/// `span.start + hop`, ...; a trailing partial window is dropped.
pub fn segment_series(
    features: &FeatureSeries,
    labels: Option<&LabelSeries>,
    config: &SegmentationConfig,
    span: Range<usize>,
) -> Result<Vec<Segment>> {
    config.validate()?;
    if span.start > span.end || span.end > features.len() {
        return Err(Error::InvalidSpan {
            start: span.start,
            end: span.end,
            len: features.len(),
        });
    }
    let labeled_len = labels.map_or(0, |l| l.len());
    let n = config.count(span.len());
    let segments = (0..n)
        .map(|k| {
            let start = span.start + k * config.hop;
            let end = start + config.winlen;
            let label_frames = labels.filter(|_| end <= labeled_len).map(|l| {
                let data = (start..end).flat_map(|t| [l.valence[t], l.arousal[t]]).collect();
                Matrix::from_vec(config.winlen, 2, data).expect("sized")
            });
            Segment {
                source_id: features.individual_id.clone(),
                start_index: start,
                frames: features.values.slice_rows(start, end),
                label_frames,
            }
        })
        .collect();
    Ok(segments)
}

/// Per-timestamp sequence rebuilt from overlapping window predictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reassembled {
    /// Absolute timestamps covered by at least one segment, ascending.
    pub indices: Vec<usize>,
    /// Mean of all covering predictions, aligned with `indices`.
    pub values: Vec<f64>,
    /// Timestamps between the first segment start and the last segment end
    /// that no segment covers.
    pub uncovered: Vec<usize>,
}

/// Averages overlapping per-segment predictions into one value per timestamp.
pub fn concat_predictions(segments: &[Segment], predictions: &[Vec<f64>]) -> Result<Reassembled> {
    if segments.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: segments.len(),
            right: predictions.len(),
        });
    }
    let Some(lo) = segments.iter().map(|s| s.start_index).min() else {
        return Ok(Reassembled::default());
    };
    let hi = segments.iter().map(Segment::end_index).max().unwrap_or(lo);
    let mut sum = vec![0.0; hi - lo];
    let mut count = vec![0usize; hi - lo];
    for (seg, pred) in segments.iter().zip(predictions) {
        if pred.len() != seg.winlen() {
            return Err(Error::LengthMismatch {
                left: seg.winlen(),
                right: pred.len(),
            });
        }
        for (k, p) in pred.iter().enumerate() {
            sum[seg.start_index - lo + k] += p;
            count[seg.start_index - lo + k] += 1;
        }
    }
    let mut out = Reassembled::default();
    for (k, (s, c)) in sum.into_iter().zip(count).enumerate() {
        if c == 0 {
            out.uncovered.push(lo + k);
        } else {
            out.indices.push(lo + k);
            out.values.push(s / c as f64);
        }
    }
    Ok(out)
}
