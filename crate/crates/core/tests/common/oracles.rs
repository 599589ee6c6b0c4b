//! Reference implementations used as ground truth. Written from the
//! definitions and deliberately independent of the library internals.

use std::collections::BTreeSet;

use dwa_core::dwa::AugmentationPool;
use dwa_core::{DistanceMetric, Matrix, RegressorParams, Segment, Target};

/// Outcome of comparing a main-path value with its oracle.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub case_id: String,
    pub main_value: Vec<f64>,
    pub oracle_value: Vec<f64>,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Elementwise comparison. The relative error of each coordinate is
    /// `|a - b| / max(|a|, |b|, floor)`; `pass` requires it below `rel_tol`.
    pub fn compare(case_id: impl Into<String>, main: &[f64], oracle: &[f64], floor: f64, rel_tol: f64) -> Self {
        assert_eq!(main.len(), oracle.len(), "length mismatch");
        let mut abs_error: f64 = 0.0;
        let mut rel_error: f64 = 0.0;
        for (a, b) in main.iter().zip(oracle) {
            let e = (a - b).abs();
            abs_error = abs_error.max(e);
            rel_error = rel_error.max(e / a.abs().max(b.abs()).max(floor));
        }
        OracleReport {
            case_id: case_id.into(),
            main_value: main.to_vec(),
            oracle_value: oracle.to_vec(),
            abs_error,
            rel_error,
            pass: rel_error < rel_tol,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn all_equal(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// CCC as `2 rho sigma_x sigma_y / (sigma_x^2 + sigma_y^2 + (mu_x - mu_y)^2)`,
/// with two-pass population moments.
pub fn oracle_ccc(x: &[f64], y: &[f64]) -> f64 {
    assert!(!x.is_empty() && x.len() == y.len());
    let (cx, cy) = (all_equal(x), all_equal(y));
    if cx || cy {
        return if cx && cy && x[0] == y[0] { 1.0 } else { 0.0 };
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n).sqrt();
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let rho = cov / (sx * sy);
    2.0 * rho * sx * sy / (sx * sx + sy * sy + (mx - my).powi(2))
}

fn column_means(m: &Matrix) -> Vec<f64> {
    (0..m.cols())
        .map(|j| {
            let mut s = 0.0;
            for i in 0..m.rows() {
                s += m.get(i, j);
            }
            s / m.rows() as f64
        })
        .collect()
}

pub fn oracle_distance(a: &Segment, b: &Segment, metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::CentroidL2 => {
            let (ca, cb) = (column_means(&a.frames), column_means(&b.frames));
            ca.iter().zip(&cb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
        }
        DistanceMetric::CentroidDp => {
            let (ca, cb) = (column_means(&a.frames), column_means(&b.frames));
            -ca.iter().zip(&cb).map(|(p, q)| p * q).sum::<f64>()
        }
        DistanceMetric::Cosine => {
            let mut total = 0.0;
            for t in 0..a.frames.rows() {
                let (x, y) = (a.frames.row(t), b.frames.row(t));
                let sx = x.iter().map(|v| v * v).sum::<f64>();
                let sy = y.iter().map(|v| v * v).sum::<f64>();
                total += if sx == 0.0 && sy == 0.0 {
                    0.0
                } else if sx == 0.0 || sy == 0.0 {
                    1.0
                } else {
                    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                    1.0 - (dot / (sx * sy).sqrt()).clamp(-1.0, 1.0)
                };
            }
            total
        }
    }
}

/// Every eligible distance, stable-sorted by distance, first `n` kept.
/// `None` when fewer than `n` segments are eligible.
pub fn oracle_nearest(
    pool: &AugmentationPool,
    target: &Segment,
    metric: DistanceMetric,
    n: usize,
    exclude: &BTreeSet<String>,
) -> Option<Vec<(usize, f64)>> {
    let mut all: Vec<(usize, f64)> = pool
        .segments()
        .iter()
        .enumerate()
        .filter(|(_, s)| !exclude.contains(&s.source_id))
        .map(|(i, s)| (i, oracle_distance(target, s, metric)))
        .collect();
    if n == 0 || n > all.len() {
        return None;
    }
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"));
    all.truncate(n);
    Some(all)
}

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Straightforward GRU unroll over the flat parameter layout: for each gate
/// in order update, reset, candidate the blocks W (h x d), U (h x h), b (h),
/// then w_out (h) and b_out.
pub fn oracle_forward(theta: &[f64], d: usize, h: usize, frames: &Matrix) -> Vec<f64> {
    let gate = |g: usize| {
        let base = g * (h * d + h * h + h);
        let w = &theta[base..base + h * d];
        let u = &theta[base + h * d..base + h * d + h * h];
        let b = &theta[base + h * d + h * h..base + h * d + h * h + h];
        (w, u, b)
    };
    let (wz, uz, bz) = gate(0);
    let (wr, ur, br) = gate(1);
    let (wn, un, bn) = gate(2);
    let out_base = 3 * (h * d + h * h + h);
    let w_out = &theta[out_base..out_base + h];
    let b_out = theta[out_base + h];

    let lin = |w: &[f64], u: &[f64], b: &[f64], x: &[f64], hv: &[f64], i: usize| {
        let mut s = b[i];
        for j in 0..d {
            s += w[i * d + j] * x[j];
        }
        for j in 0..h {
            s += u[i * h + j] * hv[j];
        }
        s
    };
    let mut hidden = vec![0.0; h];
    let mut out = Vec::with_capacity(frames.rows());
    for t in 0..frames.rows() {
        let x = frames.row(t);
        let z: Vec<f64> = (0..h).map(|i| sig(lin(wz, uz, bz, x, &hidden, i))).collect();
        let r: Vec<f64> = (0..h).map(|i| sig(lin(wr, ur, br, x, &hidden, i))).collect();
        let rh: Vec<f64> = (0..h).map(|i| r[i] * hidden[i]).collect();
        let cand: Vec<f64> = (0..h).map(|i| lin(wn, un, bn, x, &rh, i).tanh()).collect();
        hidden = (0..h).map(|i| (1.0 - z[i]) * cand[i] + z[i] * hidden[i]).collect();
        out.push(b_out + (0..h).map(|i| w_out[i] * hidden[i]).sum::<f64>());
    }
    out
}

fn target_column(target: Target) -> usize {
    match target {
        Target::Valence => 0,
        Target::Arousal => 1,
    }
}

/// `1 - ccc` of the concatenated batch predictions.
pub fn oracle_loss(theta: &[f64], d: usize, h: usize, batch: &[Segment], target: Target) -> f64 {
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let col = target_column(target);
    for seg in batch {
        preds.extend(oracle_forward(theta, d, h, &seg.frames));
        let lf = seg.label_frames.as_ref().expect("labeled batch");
        labels.extend((0..lf.rows()).map(|t| lf.get(t, col)));
    }
    1.0 - oracle_ccc(&preds, &labels)
}

/// Central finite differences of the CCC loss, one coordinate at a time.
pub fn oracle_grad(params: &RegressorParams, batch: &[Segment], target: Target, step: f64) -> Vec<f64> {
    assert!(step > 0.0);
    let (d, h) = (params.input_dim(), params.hidden_dim());
    let mut theta = params.as_slice().to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = theta[i];
            theta[i] = orig + step;
            let up = oracle_loss(&theta, d, h, batch, target);
            theta[i] = orig - step;
            let down = oracle_loss(&theta, d, h, batch, target);
            theta[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}
