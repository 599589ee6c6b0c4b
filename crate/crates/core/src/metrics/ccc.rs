//! Concordance correlation coefficient, population moments.
//!
//! `ccc = 2 cov(x, y) / (var x + var y + (mean x - mean y)^2)`, which
//! factors as `pcc * bcf` whenever both standard deviations are non-zero.
//!
//! Degenerate inputs: a sequence whose elements are all equal has standard
//! deviation exactly 0. Two equal constants give ccc 1, two different
//! constants give 0, and exactly one constant sequence gives 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CccReport {
    pub ccc: f64,
    /// Pearson correlation; `None` when either sequence is constant.
    pub pcc: Option<f64>,
    /// Bias correction factor; `None` when the denominator vanishes.
    pub bcf: Option<f64>,
    pub mean_pred: f64,
    pub mean_label: f64,
    pub std_pred: f64,
    pub std_label: f64,
    pub n_points: usize,
    /// Either standard deviation is zero.
    pub degenerate: bool,
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
    const_x: bool,
    const_y: bool,
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

fn moments(x: &[f64], y: &[f64]) -> Result<Moments> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let const_x = is_constant(x);
    let const_y = is_constant(y);
    let mean_x = if const_x { x[0] } else { x.iter().sum::<f64>() / n };
    let mean_y = if const_y { y[0] } else { y.iter().sum::<f64>() / n };
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    if !(const_x && const_y) {
        for (a, b) in x.iter().zip(y) {
            let dx = a - mean_x;
            let dy = b - mean_y;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    Ok(Moments {
        mean_x,
        mean_y,
        var_x: if const_x { 0.0 } else { sxx / n },
        var_y: if const_y { 0.0 } else { syy / n },
        cov: if const_x || const_y { 0.0 } else { sxy / n },
        const_x,
        const_y,
    })
}

pub fn ccc(pred: &[f64], label: &[f64]) -> Result<CccReport> {
    let m = moments(pred, label)?;
    let diff = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + diff * diff;
    let std_x = m.var_x.sqrt();
    let std_y = m.var_y.sqrt();
    let degenerate = m.const_x || m.const_y;
    let value = if degenerate {
        if m.const_x && m.const_y && diff == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        2.0 * m.cov / denom
    };
    Ok(CccReport {
        ccc: value,
        pcc: (!degenerate).then(|| m.cov / (std_x * std_y)),
        bcf: (denom > 0.0).then(|| 2.0 * std_x * std_y / denom),
        mean_pred: m.mean_x,
        mean_label: m.mean_y,
        std_pred: std_x,
        std_label: std_y,
        n_points: pred.len(),
        degenerate,
    })
}

/// `1 - ccc`, in `[0, 2]`.
pub fn ccc_loss(pred: &[f64], label: &[f64]) -> Result<f64> {
    Ok(1.0 - ccc(pred, label)?.ccc)
}

/// CCC and its derivative with respect to each prediction.
///
/// The derivative is zero when the labels are constant.
pub fn ccc_gradient(pred: &[f64], label: &[f64]) -> Result<(CccReport, Vec<f64>)> {
    let report = ccc(pred, label)?;
    let m = moments(pred, label)?;
    let n = pred.len() as f64;
    let diff = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + diff * diff;
    if m.const_y || denom == 0.0 {
        return Ok((report, vec![0.0; pred.len()]));
    }
    // numerator 2 cov; d cov/dx_i = (y_i - mean_y)/n,
    // d denom/dx_i = 2 (x_i - mean_x)/n + 2 diff/n
    let num = 2.0 * m.cov;
    let grad = pred
        .iter()
        .zip(label)
        .map(|(x, y)| {
            let dnum = 2.0 * (y - m.mean_y) / n;
            let dden = 2.0 * (x - m.mean_x) / n + 2.0 * diff / n;
            (dnum * denom - num * dden) / (denom * denom)
        })
        .collect();
    Ok((report, grad))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn perfect_agreement() {
        let x = [0.3, -0.1, 0.7, 0.2];
        let r = ccc(&x, &x).unwrap();
        assert_eq!(r.ccc, 1.0);
        assert_eq!(ccc_loss(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn perfect_disagreement() {
        let x = [1.0, -1.0, 2.0, -2.0];
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = ccc(&x, &y).unwrap();
        assert!((r.ccc + 1.0).abs() < 1e-15);
        assert!((ccc_loss(&x, &y).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn small_hand_case() {
        // x = [1,2,3], y = [1,2,4]: means 2, 7/3; var x = 2/3, var y = 14/9,
        // cov = 1; ccc = 2 / (2/3 + 14/9 + 1/9) = 6/7
        let r = ccc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r.ccc - 6.0 / 7.0).abs() < 1e-12);
        assert!((r.ccc - r.pcc.unwrap() * r.bcf.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_rules() {
        let c = [0.1, 0.1, 0.1];
        let r = ccc(&c, &c).unwrap();
        assert_eq!(r.ccc, 1.0);
        assert!(r.degenerate && r.pcc.is_none() && r.bcf.is_none());
        assert_eq!(ccc(&c, &[0.2, 0.2, 0.2]).unwrap().ccc, 0.0);
        let r = ccc(&c, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.ccc, 0.0);
        assert!(r.degenerate && r.pcc.is_none() && r.bcf == Some(0.0));
        assert_eq!(ccc(&[0.0, 1.0, 2.0], &c).unwrap().ccc, 0.0);
        assert_eq!(ccc_loss(&[0.0, 1.0, 2.0], &c).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(ccc(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(ccc(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = vec![0.2, -0.4, 0.9, 0.1, 0.5];
        let y = vec![0.1, -0.2, 0.7, 0.4, 0.3];
        let (_, g) = ccc_gradient(&x, &y).unwrap();
        let h = 1e-6;
        for i in 0..x.len() {
            let mut p = x.clone();
            p[i] += h;
            let mut m = x.clone();
            m[i] -= h;
            let fd = (ccc(&p, &y).unwrap().ccc - ccc(&m, &y).unwrap().ccc) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradient_zero_for_constant_labels() {
        let (r, g) = ccc_gradient(&[0.1, 0.5, 0.2], &[0.3, 0.3, 0.3]).unwrap();
        assert_eq!(r.ccc, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(-3.0f64..3.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn properties((x, y) in pair(), a in 0.1f64..5.0, b in -2.0f64..2.0) {
            let r = ccc(&x, &y).unwrap();
            let s = ccc(&y, &x).unwrap();
            prop_assert!((r.ccc - s.ccc).abs() < 1e-12);
            prop_assert!(r.ccc.abs() <= 1.0 + 1e-12);
            if let (Some(p), Some(f)) = (r.pcc, r.bcf) {
                prop_assert!((r.ccc - p * f).abs() < 1e-12);
                prop_assert!(r.ccc.abs() <= p.abs() + 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
            }
            let fx: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let fy: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            prop_assert!((ccc(&fx, &fy).unwrap().ccc - r.ccc).abs() < 1e-9);
        }
    }
}
