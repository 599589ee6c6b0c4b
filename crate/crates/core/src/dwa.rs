//! Distance weighting augmentation.
//!
//! Every labeled segment of every D_G individual goes into an
//! [`AugmentationPool`]. For each segment of a target individual's personal
//! training span, the `n` pool segments nearest under the chosen
//! [`DistanceMetric`] are appended to the fine-tuning set (weight 1); all
//! other pool segments get weight 0 for that target. Selection is with
//! replacement across target segments, so a pool segment can appear several
//! times in the result.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::metrics::distance::centroid_of;
use crate::metrics::{cosine_frames, l2_between, neg_dot, DistanceMetric};
use crate::segmentation::{segment_series, Segment, SegmentationConfig};

/// Immutable, indexed collection of labeled D_G segments.
#[derive(Debug, Clone)]
pub struct AugmentationPool {
    segments: Vec<Segment>,
    centroids: Vec<Vec<f64>>,
    winlen: usize,
    dim: usize,
    fingerprint: String,
}

impl AugmentationPool {
    /// Builds a pool from labeled segments; `pool_index` is the position in
    /// `segments`.
    pub fn from_segments(segments: Vec<Segment>, fingerprint: String) -> Result<Self> {
        let first = segments.first().ok_or(Error::EmptyGlobalSplit)?;
        let (winlen, dim) = (first.winlen(), first.dim());
        for s in &segments {
            if s.winlen() != winlen || s.dim() != dim {
                return Err(Error::FingerprintMismatch(format!(
                    "pool segment of `{}` at {} is {}x{}, expected {winlen}x{dim}",
                    s.source_id,
                    s.start_index,
                    s.winlen(),
                    s.dim()
                )));
            }
            if !s.is_labeled() {
                return Err(Error::UnlabeledSpan(s.source_id.clone()));
            }
        }
        let centroids = segments.iter().map(|s| centroid_of(&s.frames)).collect();
        Ok(AugmentationPool {
            segments,
            centroids,
            winlen,
            dim,
            fingerprint,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn get(&self, pool_index: usize) -> Option<&Segment> {
        self.segments.get(pool_index)
    }

    pub fn winlen(&self) -> usize {
        self.winlen
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn check_target(&self, target: &Segment) -> Result<()> {
        if target.winlen() != self.winlen || target.dim() != self.dim {
            return Err(Error::FingerprintMismatch(format!(
                "target segment is {}x{}, pool holds {}x{}",
                target.winlen(),
                target.dim(),
                self.winlen,
                self.dim
            )));
        }
        Ok(())
    }
}

/// Segments every D_G individual (sorted by id) over its whole series.
///
/// Expects an already standardized corpus.
pub fn build_pool(corpus: &Corpus, seg: &SegmentationConfig) -> Result<AugmentationPool> {
    seg.validate()?;
    let global = corpus.global();
    if global.is_empty() {
        return Err(Error::EmptyGlobalSplit);
    }
    let mut segments = Vec::new();
    for ind in global {
        let segs = segment_series(&ind.features, Some(&ind.labels), seg, 0..ind.labeled_len())?;
        segments.extend(segs);
    }
    if segments.is_empty() {
        return Err(Error::PoolTooSmall {
            requested: 1,
            available: 0,
        });
    }
    let fingerprint = Fingerprint::new()
        .u64(seg.winlen as u64)
        .u64(seg.hop as u64)
        .str(&corpus.fingerprint())
        .finish();
    AugmentationPool::from_segments(segments, fingerprint)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwaConfig {
    pub metric: DistanceMetric,
    /// Pool segments selected per target segment.
    pub n: usize,
    #[serde(default)]
    pub exclude_source_ids: BTreeSet<String>,
}

impl DwaConfig {
    pub fn new(metric: DistanceMetric, n: usize) -> Self {
        DwaConfig {
            metric,
            n,
            exclude_source_ids: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub pool_index: usize,
    pub distance: f64,
}

fn by_distance_then_index(a: &Selection, b: &Selection) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or_else(|| a.distance.total_cmp(&b.distance))
        .then(a.pool_index.cmp(&b.pool_index))
}

/// The `n` nearest non-excluded pool segments, ascending by distance with
/// ties broken by ascending `pool_index`. Exact scan.
pub fn nearest(
    pool: &AugmentationPool,
    target: &Segment,
    metric: DistanceMetric,
    n: usize,
    exclude_source_ids: &BTreeSet<String>,
) -> Result<Vec<Selection>> {
    pool.check_target(target)?;
    let target_centroid = centroid_of(&target.frames);
    let mut candidates: Vec<Selection> = pool
        .segments
        .par_iter()
        .enumerate()
        .filter(|(_, s)| !exclude_source_ids.contains(&s.source_id))
        .map(|(i, s)| {
            let distance = match metric {
                DistanceMetric::CentroidL2 => l2_between(&target_centroid, &pool.centroids[i]),
                DistanceMetric::CentroidDp => neg_dot(&target_centroid, &pool.centroids[i]),
                DistanceMetric::Cosine => cosine_frames(&s.frames, &target.frames),
            };
            Selection {
                pool_index: i,
                distance,
            }
        })
        .collect();
    if n == 0 || n > candidates.len() {
        return Err(Error::PoolTooSmall {
            requested: n,
            available: candidates.len(),
        });
    }
    if n < candidates.len() {
        candidates.select_nth_unstable_by(n - 1, by_distance_then_index);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(by_distance_then_index);
    Ok(candidates)
}

/// One selected pool segment for one target segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub target_segment_index: usize,
    /// 0-based rank among the target's selections.
    pub rank: usize,
    pub pool_index: usize,
    pub source_id: String,
    pub start_index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub original: Vec<Segment>,
    pub augmentations: Vec<Augmentation>,
    /// `original` followed by the selected pool segments, target-then-rank order.
    pub combined: Vec<Segment>,
}

impl AugmentedDataset {
    /// How many times each pool segment was selected, indexed by `pool_index`.
    pub fn selection_counts(&self, pool_len: usize) -> Vec<usize> {
        let mut counts = vec![0; pool_len];
        for a in &self.augmentations {
            counts[a.pool_index] += 1;
        }
        counts
    }
}

pub fn augment_individual(
    pool: &AugmentationPool,
    train_segments: &[Segment],
    config: &DwaConfig,
) -> Result<AugmentedDataset> {
    if train_segments.is_empty() {
        return Err(Error::EmptySet("augmentation target"));
    }
    for t in train_segments {
        pool.check_target(t)?;
    }
    let per_target: Vec<Vec<Selection>> = train_segments
        .par_iter()
        .map(|t| nearest(pool, t, config.metric, config.n, &config.exclude_source_ids))
        .collect::<Result<_>>()?;

    let mut augmentations = Vec::with_capacity(config.n * train_segments.len());
    let mut combined = train_segments.to_vec();
    for (target_segment_index, selections) in per_target.into_iter().enumerate() {
        for (rank, sel) in selections.into_iter().enumerate() {
            let seg = &pool.segments[sel.pool_index];
            augmentations.push(Augmentation {
                target_segment_index,
                rank,
                pool_index: sel.pool_index,
                source_id: seg.source_id.clone(),
                start_index: seg.start_index,
                distance: sel.distance,
            });
            combined.push(seg.clone());
        }
    }
    Ok(AugmentedDataset {
        original: train_segments.to_vec(),
        augmentations,
        combined,
    })
}

/// Writes `target_segment_index,rank,pool_index,source_id,start_index,distance`.
pub fn export_augmentation_report(dataset: &AugmentedDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "target_segment_index",
        "rank",
        "pool_index",
        "source_id",
        "start_index",
        "distance",
    ])?;
    for a in &dataset.augmentations {
        w.write_record(&[
            a.target_segment_index.to_string(),
            a.rank.to_string(),
            a.pool_index.to_string(),
            a.source_id.clone(),
            a.start_index.to_string(),
            a.distance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;
    use crate::corpus::test_util::individual;
    use crate::corpus::{Portions, Split};
    use crate::matrix::Matrix;

    fn seg(id: &str, start: usize, rows: &[&[f64]]) -> Segment {
        let frames = Matrix::from_rows(rows).unwrap();
        let label_frames = Some(Matrix::zeros(frames.rows(), 2));
        Segment {
            source_id: id.into(),
            start_index: start,
            frames,
            label_frames,
        }
    }

    fn orthonormal_pool() -> AugmentationPool {
        AugmentationPool::from_segments(
            vec![
                seg("a", 0, &[&[1.0, 0.0, 0.0]]),
                seg("b", 0, &[&[0.0, 1.0, 0.0]]),
                seg("c", 0, &[&[0.0, 0.0, 1.0]]),
            ],
            "test".into(),
        )
        .unwrap()
    }

    #[test]
    fn identity_is_nearest() {
        let pool = orthonormal_pool();
        let target = seg("t", 0, &[&[0.0, 1.0, 0.0]]);
        let sel = nearest(&pool, &target, DistanceMetric::CentroidL2, 1, &BTreeSet::new()).unwrap();
        assert_eq!(sel, vec![Selection { pool_index: 1, distance: 0.0 }]);
    }

    #[test]
    fn ties_break_by_pool_index() {
        let pool = AugmentationPool::from_segments(
            vec![
                seg("a", 0, &[&[5.0, 5.0]]),
                seg("b", 0, &[&[1.0, 0.0]]),
                seg("c", 0, &[&[1.0, 0.0]]),
            ],
            "test".into(),
        )
        .unwrap();
        let target = seg("t", 0, &[&[1.0, 0.0]]);
        for metric in DistanceMetric::ALL {
            let sel = nearest(&pool, &target, metric, 1, &BTreeSet::new()).unwrap();
            let expected = if metric == DistanceMetric::CentroidDp { 0 } else { 1 };
            assert_eq!(sel[0].pool_index, expected, "{metric}");
        }
        let sel = nearest(&pool, &target, DistanceMetric::Cosine, 2, &BTreeSet::new()).unwrap();
        assert_eq!(sel.iter().map(|s| s.pool_index).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn exclusion_and_pool_too_small() {
        let pool = orthonormal_pool();
        let target = seg("t", 0, &[&[0.0, 1.0, 0.0]]);
        let exclude: BTreeSet<String> = ["b".to_string()].into();
        let sel = nearest(&pool, &target, DistanceMetric::Cosine, 2, &exclude).unwrap();
        assert!(sel.iter().all(|s| s.pool_index != 1));
        let err = nearest(&pool, &target, DistanceMetric::Cosine, 3, &exclude).unwrap_err();
        assert!(matches!(err, Error::PoolTooSmall { requested: 3, available: 2 }));
        assert!(nearest(&pool, &target, DistanceMetric::Cosine, 0, &exclude).is_err());
    }

    #[test]
    fn mismatched_target_rejected() {
        let pool = orthonormal_pool();
        let target = seg("t", 0, &[&[0.0, 1.0]]);
        let err = augment_individual(&pool, &[target], &DwaConfig::new(DistanceMetric::Cosine, 1)).unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch(_)));
        let err = augment_individual(&pool, &[], &DwaConfig::new(DistanceMetric::Cosine, 1)).unwrap_err();
        assert!(matches!(err, Error::EmptySet(_)));
    }

    #[test]
    fn augmented_sizes() {
        let pool = orthonormal_pool();
        let targets: Vec<_> = (0..4).map(|i| seg("t", i, &[&[1.0, i as f64, 0.5]])).collect();
        let ds = augment_individual(&pool, &targets, &DwaConfig::new(DistanceMetric::Cosine, 2)).unwrap();
        assert_eq!(ds.augmentations.len(), 8);
        assert_eq!(ds.combined.len(), 12);
        assert_eq!(&ds.combined[..4], &targets[..]);
        // target-then-rank order
        let order: Vec<_> = ds.augmentations.iter().map(|a| (a.target_segment_index, a.rank)).collect();
        assert_eq!(order, [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1), (3, 0), (3, 1)]);
    }

    #[test]
    fn exhaustive_selection_takes_every_pool_segment_once() {
        let pool = orthonormal_pool();
        let target = seg("t", 0, &[&[0.3, 0.2, 0.1]]);
        let ds = augment_individual(&pool, &[target], &DwaConfig::new(DistanceMetric::CentroidDp, 3)).unwrap();
        assert_eq!(ds.combined.len(), 4);
        assert_eq!(ds.selection_counts(pool.len()), vec![1, 1, 1]);
    }

    #[test]
    fn pool_from_corpus() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let rows: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let p = Some(Portions { train_end: 3, devel_end: 6 });
        let corpus = Corpus::new(
            vec![
                individual("g2", Split::DevelG, &rows, None),
                individual("g1", Split::TrainG, &rows, None),
                individual("t", Split::Test, &rows, p),
            ],
            1,
            1.0,
            BTreeMap::new(),
        )
        .unwrap();
        let seg_cfg = SegmentationConfig { winlen: 10, hop: 5 };
        let pool = build_pool(&corpus, &seg_cfg).unwrap();
        assert_eq!(pool.len(), 2);
        assert_eq!(pool.segments()[0].source_id, "g1");
        assert_eq!(pool.segments()[1].source_id, "g2");
        let again = build_pool(&corpus, &seg_cfg).unwrap();
        assert_eq!(again.segments(), pool.segments());
        assert_eq!(again.fingerprint(), pool.fingerprint());

        let only_test = Corpus::new(
            vec![individual("t", Split::Test, &rows, p)],
            1,
            1.0,
            BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(build_pool(&only_test, &seg_cfg), Err(Error::EmptyGlobalSplit)));
    }

    #[test]
    fn report_csv() {
        let dir = tempfile::tempdir().unwrap();
        let pool = orthonormal_pool();
        let targets: Vec<_> = (0..4).map(|i| seg("t", i, &[&[1.0, i as f64, 0.5]])).collect();
        let ds = augment_individual(&pool, &targets, &DwaConfig::new(DistanceMetric::CentroidL2, 2)).unwrap();
        let path = dir.path().join("r.csv");
        export_augmentation_report(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "target_segment_index,rank,pool_index,source_id,start_index,distance");
        assert_eq!(lines.len(), 9);
        let path2 = dir.path().join("r2.csv");
        export_augmentation_report(&ds, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());

        let empty = AugmentedDataset {
            original: vec![],
            augmentations: vec![],
            combined: vec![],
        };
        export_augmentation_report(&empty, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    }

    fn random_pool(d: usize, w: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (
            proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, w * d), 4..40),
            proptest::collection::vec(-2.0f64..2.0, w * d),
        )
    }

    fn to_pool(raw: &[Vec<f64>], w: usize, d: usize) -> AugmentationPool {
        let segs = raw
            .iter()
            .enumerate()
            .map(|(i, v)| Segment {
                source_id: format!("s{}", i % 5),
                start_index: i,
                frames: Matrix::from_vec(w, d, v.clone()).unwrap(),
                label_frames: Some(Matrix::zeros(w, 2)),
            })
            .collect();
        AugmentationPool::from_segments(segs, "p".into()).unwrap()
    }

    fn target_of(v: &[f64], w: usize, d: usize) -> Segment {
        Segment {
            source_id: "target".into(),
            start_index: 0,
            frames: Matrix::from_vec(w, d, v.to_vec()).unwrap(),
            label_frames: None,
        }
    }

    proptest! {
        #[test]
        fn selection_for_n_is_prefix_of_n_plus_one((raw, t) in random_pool(3, 2), n in 1usize..4) {
            let pool = to_pool(&raw, 2, 3);
            let target = target_of(&t, 2, 3);
            for metric in DistanceMetric::ALL {
                let a = nearest(&pool, &target, metric, n, &BTreeSet::new()).unwrap();
                let b = nearest(&pool, &target, metric, n + 1, &BTreeSet::new()).unwrap();
                prop_assert_eq!(&a[..], &b[..n]);
            }
        }

        #[test]
        fn cosine_argmin_row_scale_invariant((raw, t) in random_pool(3, 2), scales in proptest::collection::vec(0.1f64..10.0, 2)) {
            let pool = to_pool(&raw, 2, 3);
            let target = target_of(&t, 2, 3);
            let scale = |v: &[f64]| -> Vec<f64> {
                v.chunks(3).zip(&scales).flat_map(|(row, s)| row.iter().map(move |x| x * s)).collect()
            };
            let scaled_raw: Vec<Vec<f64>> = raw.iter().map(|v| scale(v)).collect();
            let scaled_pool = to_pool(&scaled_raw, 2, 3);
            let scaled_target = target_of(&scale(&t), 2, 3);
            let a = nearest(&pool, &target, DistanceMetric::Cosine, 4, &BTreeSet::new()).unwrap();
            let b = nearest(&scaled_pool, &scaled_target, DistanceMetric::Cosine, 4, &BTreeSet::new()).unwrap();
            let ia: Vec<_> = a.iter().map(|s| s.pool_index).collect();
            let ib: Vec<_> = b.iter().map(|s| s.pool_index).collect();
            // near-ties can legitimately flip under rounding
            let gap = |s: &[Selection]| s.windows(2).map(|w| w[1].distance - w[0].distance).fold(f64::INFINITY, f64::min);
            if gap(&a) > 1e-9 {
                prop_assert_eq!(ia, ib);
            }
        }

        #[test]
        fn l2_argmin_translation_invariant((raw, t) in random_pool(3, 2), shift in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let pool = to_pool(&raw, 2, 3);
            let target = target_of(&t, 2, 3);
            let moved = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(k, x)| x + shift[k % 3]).collect() };
            let moved_raw: Vec<Vec<f64>> = raw.iter().map(|v| moved(v)).collect();
            let a = nearest(&pool, &target, DistanceMetric::CentroidL2, 4, &BTreeSet::new()).unwrap();
            let b = nearest(&to_pool(&moved_raw, 2, 3), &target_of(&moved(&t), 2, 3), DistanceMetric::CentroidL2, 4, &BTreeSet::new()).unwrap();
            let gap = a.windows(2).map(|w| w[1].distance - w[0].distance).fold(f64::INFINITY, f64::min);
            if gap > 1e-9 {
                prop_assert_eq!(
                    a.iter().map(|s| s.pool_index).collect::<Vec<_>>(),
                    b.iter().map(|s| s.pool_index).collect::<Vec<_>>()
                );
            }
        }

        #[test]
        fn selection_counts_match_weights((raw, t) in random_pool(2, 3), n in 1usize..4) {
            let pool = to_pool(&raw, 3, 2);
            let targets = vec![target_of(&t, 3, 2), target_of(&raw[0], 3, 2)];
            let ds = augment_individual(&pool, &targets, &DwaConfig::new(DistanceMetric::CentroidL2, n)).unwrap();
            let counts = ds.selection_counts(pool.len());
            for (i, seg) in pool.segments().iter().enumerate() {
                let appearances = ds.combined[targets.len()..].iter().filter(|s| *s == seg).count();
                // identical frames at another index would double count
                prop_assert!(appearances >= counts[i]);
            }
            prop_assert_eq!(counts.iter().sum::<usize>(), n * targets.len());
        }
    }
}
