use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to development CCCs before proportional weighting.
pub const FUSION_EPSILON: f64 = 1e-6;

/// Weights proportional to each stream's (floored) development CCC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_a: f64,
    pub w_b: f64,
    pub dev_ccc_a: f64,
    pub dev_ccc_b: f64,
}

impl FusionWeights {
    pub fn from_dev_ccc(dev_ccc_a: f64, dev_ccc_b: f64) -> Self {
        // f64::max drops a NaN operand, so a NaN score is floored too
        let a = dev_ccc_a.max(FUSION_EPSILON);
        let b = dev_ccc_b.max(FUSION_EPSILON);
        // divide the smaller share and complement it, so the weights sum to
        // exactly one and 0.6 / 0.2 gives exactly 0.75 / 0.25
        let (w_a, w_b) = if a >= b {
            let w_b = b / (a + b);
            (1.0 - w_b, w_b)
        } else {
            let w_a = a / (a + b);
            (w_a, 1.0 - w_a)
        };
        FusionWeights {
            w_a,
            w_b,
            dev_ccc_a,
            dev_ccc_b,
        }
    }
}

/// Elementwise `w_a * a + w_b * b`.
pub fn late_fuse(preds_a: &[f64], preds_b: &[f64], dev_ccc_a: f64, dev_ccc_b: f64) -> Result<Vec<f64>> {
    if preds_a.len() != preds_b.len() {
        return Err(Error::LengthMismatch {
            left: preds_a.len(),
            right: preds_b.len(),
        });
    }
    let w = FusionWeights::from_dev_ccc(dev_ccc_a, dev_ccc_b);
    Ok(preds_a.iter().zip(preds_b).map(|(a, b)| w.w_a * a + w.w_b * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_weights() {
        let w = FusionWeights::from_dev_ccc(0.6, 0.2);
        assert_eq!(w.w_a, 0.75);
        assert_eq!(w.w_b, 0.25);
        let swapped = FusionWeights::from_dev_ccc(0.2, 0.6);
        assert_eq!((swapped.w_a, swapped.w_b), (0.25, 0.75));
        assert_eq!(late_fuse(&[1.0, 0.0], &[0.0, 1.0], 0.6, 0.2).unwrap(), vec![0.75, 0.25]);
    }

    #[test]
    fn equal_scores_average() {
        assert_eq!(late_fuse(&[1.0, 3.0], &[3.0, 5.0], 0.4, 0.4).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn non_positive_score_is_floored() {
        let w = FusionWeights::from_dev_ccc(0.5, -0.3);
        assert!((w.w_b - FUSION_EPSILON / (0.5 + FUSION_EPSILON)).abs() < 1e-18);
        assert_eq!(w.w_a + w.w_b, 1.0);
        let fused = late_fuse(&[1.0, 2.0], &[100.0, -100.0], 0.5, 0.0).unwrap();
        assert!((fused[0] - 1.0).abs() < 1e-3 && (fused[1] - 2.0).abs() < 1e-3);
        let w = FusionWeights::from_dev_ccc(f64::NAN, f64::NAN);
        assert_eq!(w.w_a, 0.5);
        assert!(late_fuse(&[1.0], &[], 0.1, 0.1).is_err());
    }
}
