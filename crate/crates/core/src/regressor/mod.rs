//! Single-layer gated recurrent regressor: a feature sequence in, one
//! scalar prediction per timestep out.
//!
//! Cell (per timestep, `h_prev` starts at zero):
//!
//! ```text
//! z = sigmoid(W_z x + U_z h_prev + b_z)
//! r = sigmoid(W_r x + U_r h_prev + b_r)
//! n = tanh(W_n x + U_n (r * h_prev) + b_n)
//! h = (1 - z) * n + z * h_prev
//! y = w_out . h + b_out
//! ```

mod checkpoint;
mod grad;
mod train;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use grad::{loss_and_gradient, LossAndGradient};
pub use train::{dev_ccc, train, Adam, EarlyStopping, TrainConfig, TrainTrace};

/// Emotion dimension a model predicts. One model per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Valence,
    Arousal,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Arousal, Target::Valence];

    /// Column in a segment's `label_frames`.
    pub fn column(self) -> usize {
        match self {
            Target::Valence => 0,
            Target::Arousal => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Valence => "valence",
            Target::Arousal => "arousal",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(Target::Valence),
            "arousal" => Ok(Target::Arousal),
            _ => Err(Error::InvalidConfig(format!("unknown target `{s}`"))),
        }
    }
}

/// Which block of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Gate {
    Update = 0,
    Reset = 1,
    Candidate = 2,
}

/// Flat parameter vector with a fixed layout: for each of the update,
/// reset and candidate gates `W (h×d)`, `U (h×h)`, `b (h)`; then
/// `w_out (h)` and `b_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorParams {
    input_dim: usize,
    hidden_dim: usize,
    seed: u64,
    data: Vec<f64>,
}

impl RegressorParams {
    pub fn count(d: usize, h: usize) -> usize {
        3 * (h * d + h * h + h) + h + 1
    }

    pub fn zeros(d: usize, h: usize) -> Self {
        RegressorParams {
            input_dim: d,
            hidden_dim: h,
            seed: 0,
            data: vec![0.0; Self::count(d, h)],
        }
    }

    pub fn from_flat(d: usize, h: usize, seed: u64, data: Vec<f64>) -> Result<Self> {
        if d == 0 || h == 0 {
            return Err(Error::InvalidDims(format!("d = {d}, h = {h}")));
        }
        if data.len() != Self::count(d, h) {
            return Err(Error::LengthMismatch {
                left: Self::count(d, h),
                right: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regressor parameters".into()));
        }
        Ok(RegressorParams {
            input_dim: d,
            hidden_dim: h,
            seed,
            data,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn gate_base(&self, gate: Gate) -> usize {
        let (d, h) = (self.input_dim, self.hidden_dim);
        gate as usize * (h * d + h * h + h)
    }

    pub(crate) fn w_range(&self, gate: Gate) -> Range<usize> {
        let b = self.gate_base(gate);
        b..b + self.hidden_dim * self.input_dim
    }

    pub(crate) fn u_range(&self, gate: Gate) -> Range<usize> {
        let b = self.w_range(gate).end;
        b..b + self.hidden_dim * self.hidden_dim
    }

    pub(crate) fn b_range(&self, gate: Gate) -> Range<usize> {
        let b = self.u_range(gate).end;
        b..b + self.hidden_dim
    }

    pub(crate) fn w_out_range(&self) -> Range<usize> {
        let b = self.b_range(Gate::Candidate).end;
        b..b + self.hidden_dim
    }

    pub(crate) fn b_out_index(&self) -> usize {
        self.w_out_range().end
    }

    pub(crate) fn block(&self, r: Range<usize>) -> &[f64] {
        &self.data[r]
    }
}

/// Uniform weights in `±1/sqrt(fan_in)`, zero biases; deterministic in `seed`.
pub fn init_params(d: usize, h: usize, seed: u64) -> Result<RegressorParams> {
    if d == 0 || h == 0 {
        return Err(Error::InvalidDims(format!("d = {d}, h = {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = RegressorParams::zeros(d, h);
    p.seed = seed;
    let in_bound = 1.0 / (d as f64).sqrt();
    let hid_bound = 1.0 / (h as f64).sqrt();
    for gate in [Gate::Update, Gate::Reset, Gate::Candidate] {
        let (w, u) = (p.w_range(gate), p.u_range(gate));
        for v in &mut p.data[w] {
            *v = rng.random_range(-in_bound..in_bound);
        }
        for v in &mut p.data[u] {
            *v = rng.random_range(-hid_bound..hid_bound);
        }
    }
    let out = p.w_out_range();
    for v in &mut p.data[out] {
        *v = rng.random_range(-hid_bound..hid_bound);
    }
    Ok(p)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one sequence, kept for the backward pass.
pub(crate) struct ForwardCache {
    /// `(T + 1) × h`, row 0 is the zero initial state.
    pub hidden: Vec<f64>,
    pub update: Vec<f64>,
    pub reset: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

/// `out[i] = bias[i] + M[i,:] . v` for a row-major `M`, accumulating into `out`.
#[inline]
fn affine_into(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn forward_cached(params: &RegressorParams, frames: &Matrix) -> ForwardCache {
    let h = params.hidden_dim;
    let t_len = frames.rows();
    let mut cache = ForwardCache {
        hidden: vec![0.0; (t_len + 1) * h],
        update: vec![0.0; t_len * h],
        reset: vec![0.0; t_len * h],
        candidate: vec![0.0; t_len * h],
        output: vec![0.0; t_len],
    };
    let (wz, uz, bz) = (
        params.block(params.w_range(Gate::Update)),
        params.block(params.u_range(Gate::Update)),
        params.block(params.b_range(Gate::Update)),
    );
    let (wr, ur, br) = (
        params.block(params.w_range(Gate::Reset)),
        params.block(params.u_range(Gate::Reset)),
        params.block(params.b_range(Gate::Reset)),
    );
    let (wn, un, bn) = (
        params.block(params.w_range(Gate::Candidate)),
        params.block(params.u_range(Gate::Candidate)),
        params.block(params.b_range(Gate::Candidate)),
    );
    let w_out = params.block(params.w_out_range());
    let b_out = params.data[params.b_out_index()];

    let mut az = vec![0.0; h];
    let mut ar = vec![0.0; h];
    let mut an = vec![0.0; h];
    let mut rh = vec![0.0; h];
    for t in 0..t_len {
        let x = frames.row(t);
        let (prev_part, next_part) = cache.hidden.split_at_mut((t + 1) * h);
        let hp = &prev_part[t * h..];
        let hn = &mut next_part[..h];

        az.copy_from_slice(bz);
        affine_into(&mut az, wz, x);
        affine_into(&mut az, uz, hp);
        ar.copy_from_slice(br);
        affine_into(&mut ar, wr, x);
        affine_into(&mut ar, ur, hp);
        let z = &mut cache.update[t * h..(t + 1) * h];
        let r = &mut cache.reset[t * h..(t + 1) * h];
        for i in 0..h {
            z[i] = sigmoid(az[i]);
            r[i] = sigmoid(ar[i]);
            rh[i] = r[i] * hp[i];
        }
        an.copy_from_slice(bn);
        affine_into(&mut an, wn, x);
        affine_into(&mut an, un, &rh);
        let n = &mut cache.candidate[t * h..(t + 1) * h];
        for i in 0..h {
            n[i] = an[i].tanh();
            hn[i] = (1.0 - z[i]) * n[i] + z[i] * hp[i];
        }
        cache.output[t] = b_out + w_out.iter().zip(hn.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    cache
}

/// Per-timestep predictions for one `winlen × d` window.
pub fn forward(params: &RegressorParams, frames: &Matrix) -> Result<Vec<f64>> {
    if frames.cols() != params.input_dim {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim,
            found: frames.cols(),
        });
    }
    Ok(forward_cached(params, frames).output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        assert_eq!(RegressorParams::count(1, 1), 11);
        assert_eq!(init_params(1, 1, 0).unwrap().len(), 11);
        let p = init_params(3, 4, 0).unwrap();
        assert_eq!(p.len(), 3 * (12 + 16 + 4) + 4 + 1);
        assert_eq!(p.b_out_index(), p.len() - 1);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params(3, 5, 11).unwrap();
        assert_eq!(a, init_params(3, 5, 11).unwrap());
        assert_ne!(a.as_slice(), init_params(3, 5, 12).unwrap().as_slice());
        for gate in [Gate::Update, Gate::Reset, Gate::Candidate] {
            assert!(a.block(a.w_range(gate)).iter().all(|v| v.abs() <= 1.0 / 3f64.sqrt()));
            assert!(a.block(a.u_range(gate)).iter().all(|v| v.abs() <= 1.0 / 5f64.sqrt()));
            assert!(a.block(a.b_range(gate)).iter().all(|v| *v == 0.0));
        }
        assert_eq!(a.as_slice()[a.b_out_index()], 0.0);
        assert!(matches!(init_params(0, 2, 0), Err(Error::InvalidDims(_))));
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = RegressorParams::zeros(2, 3);
        let frames = Matrix::from_rows(&[[1.0, -2.0], [0.5, 4.0], [3.0, 3.0]]).unwrap();
        assert_eq!(forward(&p, &frames).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn causal() {
        let p = init_params(2, 4, 3).unwrap();
        let a = Matrix::from_rows(&[[1.0, -2.0], [0.5, 4.0], [3.0, 3.0], [0.0, 1.0]]).unwrap();
        let mut b = a.clone();
        b.row_mut(2)[0] = -9.0;
        let ya = forward(&p, &a).unwrap();
        let yb = forward(&p, &b).unwrap();
        assert_eq!(ya[..2], yb[..2]);
        assert_ne!(ya[2], yb[2]);
    }

    #[test]
    fn dimension_checked() {
        let p = RegressorParams::zeros(2, 3);
        let frames = Matrix::from_rows(&[[1.0, -2.0, 0.0]]).unwrap();
        assert!(matches!(forward(&p, &frames), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn target_names() {
        for t in Target::ALL {
            assert_eq!(t.as_str().parse::<Target>().unwrap(), t);
        }
        assert!("dominance".parse::<Target>().is_err());
    }
}
