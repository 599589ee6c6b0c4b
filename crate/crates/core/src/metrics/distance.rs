use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::segmentation::Segment;

/// Distance used to rank pool segments against a target segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    /// Euclidean distance between segment centroids.
    CentroidL2,
    /// Negated dot product of segment centroids.
    CentroidDp,
    /// Sum over timestamps of `1 - cos(a_j, b_j)`.
    Cosine,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [
        DistanceMetric::CentroidL2,
        DistanceMetric::CentroidDp,
        DistanceMetric::Cosine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMetric::CentroidL2 => "centroid-l2",
            DistanceMetric::CentroidDp => "centroid-dp",
            DistanceMetric::Cosine => "cosine",
        }
    }

    pub fn distance(self, a: &Segment, b: &Segment) -> Result<f64> {
        match self {
            DistanceMetric::CentroidL2 => centroid_l2(a, b),
            DistanceMetric::CentroidDp => centroid_dp(a, b),
            DistanceMetric::Cosine => cosine_distance(a, b),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown distance metric `{s}`")))
    }
}

/// Mean of the segment's rows.
pub fn centroid(segment: &Segment) -> Vec<f64> {
    centroid_of(&segment.frames)
}

pub(crate) fn centroid_of(frames: &Matrix) -> Vec<f64> {
    let mut c = vec![0.0; frames.cols()];
    for row in frames.iter_rows() {
        for (acc, x) in c.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let n = frames.rows() as f64;
    c.iter_mut().for_each(|v| *v /= n);
    c
}

fn check_shapes(a: &Segment, b: &Segment) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.winlen() != b.winlen() {
        return Err(Error::DimensionMismatch {
            expected: a.winlen(),
            found: b.winlen(),
        });
    }
    Ok(())
}

pub(crate) fn l2_between(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn neg_dot(a: &[f64], b: &[f64]) -> f64 {
    -a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

pub fn centroid_l2(a: &Segment, b: &Segment) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(l2_between(&centroid(a), &centroid(b)))
}

/// Negated centroid dot product. Not a metric: it can be negative.
pub fn centroid_dp(a: &Segment, b: &Segment) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(neg_dot(&centroid(a), &centroid(b)))
}

/// Per-timestamp cosine distance summed over the window; each term is in
/// `[0, 2]`. A term with exactly one zero row is 1, with two zero rows 0.
pub fn cosine_distance(a: &Segment, b: &Segment) -> Result<f64> {
    check_shapes(a, b)?;
    Ok(cosine_frames(&a.frames, &b.frames))
}

pub(crate) fn cosine_frames(a: &Matrix, b: &Matrix) -> f64 {
    a.iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| {
            let sx = x.iter().map(|v| v * v).sum::<f64>();
            let sy = y.iter().map(|v| v * v).sum::<f64>();
            match (sx == 0.0, sy == 0.0) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 1.0,
                (false, false) => {
                    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                    // one square root keeps identical rows at exactly cos = 1;
                    // rounding can still push |cos| a hair past 1 elsewhere
                    1.0 - (dot / (sx * sy).sqrt()).clamp(-1.0, 1.0)
                }
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn seg(rows: &[&[f64]]) -> Segment {
        Segment {
            source_id: "x".into(),
            start_index: 0,
            frames: Matrix::from_rows(rows).unwrap(),
            label_frames: None,
        }
    }

    fn seg_from(m: Matrix) -> Segment {
        Segment {
            source_id: "x".into(),
            start_index: 0,
            frames: m,
            label_frames: None,
        }
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&seg(&[&[1.0, 2.0], &[3.0, 4.0]])), vec![2.0, 3.0]);
        assert_eq!(centroid(&seg(&[&[0.1, -7.25]])), vec![0.1, -7.25]);
        assert_eq!(centroid(&seg(&[&[0.5, 4.0][..]; 4])), vec![0.5, 4.0]);
    }

    #[test]
    fn centroid_l2_examples() {
        let a = seg(&[&[1.0, 1.0], &[-1.0, -1.0]]);
        let b = seg(&[&[3.0, 4.0], &[3.0, 4.0]]);
        assert_eq!(centroid_l2(&a, &a).unwrap(), 0.0);
        assert_eq!(centroid_l2(&a, &b).unwrap(), 5.0);
        assert_eq!(centroid_l2(&b, &a).unwrap(), 5.0);
    }

    #[test]
    fn centroid_dp_examples() {
        let e1 = seg(&[&[1.0, 0.0]]);
        let e2 = seg(&[&[0.0, 1.0]]);
        let zero = seg(&[&[0.0, 0.0]]);
        assert_eq!(centroid_dp(&e1, &e1).unwrap(), -1.0);
        assert_eq!(centroid_dp(&e1, &e2).unwrap(), 0.0);
        assert_eq!(centroid_dp(&seg(&[&[3.0, -2.0]]), &zero).unwrap(), 0.0);
    }

    #[test]
    fn cosine_examples() {
        let a = seg(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        let neg = seg(&[&[-1.0, -2.0], &[3.0, -0.5]]);
        assert_eq!(cosine_distance(&a, &a).unwrap(), 0.0);
        assert!((cosine_distance(&a, &neg).unwrap() - 4.0).abs() < 1e-12);
        let e1 = seg(&[&[1.0, 0.0]]);
        let e2 = seg(&[&[0.0, 2.0]]);
        assert_eq!(cosine_distance(&e1, &e2).unwrap(), 1.0);
    }

    #[test]
    fn cosine_zero_rows() {
        let z = seg(&[&[0.0, 0.0]]);
        let v = seg(&[&[1.0, 2.0]]);
        assert_eq!(cosine_distance(&z, &v).unwrap(), 1.0);
        assert_eq!(cosine_distance(&v, &z).unwrap(), 1.0);
        assert_eq!(cosine_distance(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = seg(&[&[1.0, 2.0]]);
        let b = seg(&[&[1.0, 2.0, 3.0]]);
        let c = seg(&[&[1.0, 2.0], &[1.0, 2.0]]);
        for m in DistanceMetric::ALL {
            assert!(matches!(m.distance(&a, &b), Err(Error::DimensionMismatch { .. })));
            assert!(matches!(m.distance(&a, &c), Err(Error::DimensionMismatch { .. })));
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for m in DistanceMetric::ALL {
            assert_eq!(m.as_str().parse::<DistanceMetric>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("manhattan".parse::<DistanceMetric>().is_err());
    }

    fn matrix(winlen: usize, d: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-5.0f64..5.0, winlen * d)
            .prop_map(move |v| Matrix::from_vec(winlen, d, v).unwrap())
    }

    fn triple() -> impl Strategy<Value = (Matrix, Matrix, Matrix)> {
        (1usize..6, 1usize..5).prop_flat_map(|(w, d)| (matrix(w, d), matrix(w, d), matrix(w, d)))
    }

    proptest! {
        #[test]
        fn centroid_l2_is_a_metric_on_centroids((a, b, c) in triple()) {
            let (a, b, c) = (seg_from(a), seg_from(b), seg_from(c));
            let ab = centroid_l2(&a, &b).unwrap();
            let ba = centroid_l2(&b, &a).unwrap();
            let bc = centroid_l2(&b, &c).unwrap();
            let ac = centroid_l2(&a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn centroid_l2_translation_invariant((a, b, c) in triple()) {
            let shift = c.row(0).to_vec();
            let moved = |m: &Matrix| {
                let mut m = m.clone();
                for i in 0..m.rows() {
                    for (v, s) in m.row_mut(i).iter_mut().zip(&shift) {
                        *v += s;
                    }
                }
                seg_from(m)
            };
            let before = centroid_l2(&seg_from(a.clone()), &seg_from(b.clone())).unwrap();
            let after = centroid_l2(&moved(&a), &moved(&b)).unwrap();
            prop_assert!((before - after).abs() < 1e-9);
        }

        #[test]
        fn cosine_row_scale_invariant_and_bounded((a, b, _c) in triple(), row in 0usize..6, scale in 0.01f64..100.0) {
            let before = cosine_frames(&a, &b);
            prop_assert!(before >= 0.0 && before <= 2.0 * a.rows() as f64);
            let mut scaled = a.clone();
            let r = row % a.rows();
            scaled.row_mut(r).iter_mut().for_each(|v| *v *= scale);
            let after = cosine_frames(&scaled, &b);
            prop_assert!((before - after).abs() < 1e-9);
        }

        #[test]
        fn cosine_self_distance_is_exactly_zero((a, _b, _c) in triple()) {
            prop_assert_eq!(cosine_frames(&a, &a), 0.0);
        }
    }
}
