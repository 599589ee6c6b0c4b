//! CCC loss over a batch and its exact gradient by backpropagation through time.

use super::{forward_cached, ForwardCache, Gate, RegressorParams, Target};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{ccc_gradient, CccReport};
use crate::segmentation::Segment;

#[derive(Debug, Clone)]
pub struct LossAndGradient {
    /// `1 - ccc` of the concatenated batch predictions and labels.
    pub loss: f64,
    pub grad: RegressorParams,
    pub report: CccReport,
    /// All labels in the batch are identical; the gradient is zero.
    pub degenerate_labels: bool,
}

pub(crate) fn batch_labels(batch: &[Segment], target: Target) -> Result<Vec<f64>> {
    let mut labels = Vec::new();
    for seg in batch {
        let col = seg
            .label_column(target.column())
            .ok_or_else(|| Error::UnlabeledSpan(seg.source_id.clone()))?;
        labels.extend(col);
    }
    Ok(labels)
}

pub fn loss_and_gradient(
    params: &RegressorParams,
    batch: &[Segment],
    target: Target,
) -> Result<LossAndGradient> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for seg in batch {
        if seg.dim() != params.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim(),
                found: seg.dim(),
            });
        }
    }
    let labels = batch_labels(batch, target)?;
    let caches: Vec<ForwardCache> = batch.iter().map(|s| forward_cached(params, &s.frames)).collect();
    let preds: Vec<f64> = caches.iter().flat_map(|c| c.output.iter().copied()).collect();

    let (report, dccc) = ccc_gradient(&preds, &labels)?;
    let degenerate_labels = report.std_label == 0.0;
    let mut grad = RegressorParams::zeros(params.input_dim(), params.hidden_dim());
    if !degenerate_labels {
        let mut offset = 0;
        for (seg, cache) in batch.iter().zip(&caches) {
            let w = seg.winlen();
            let dy: Vec<f64> = dccc[offset..offset + w].iter().map(|g| -g).collect();
            backward(params, &seg.frames, cache, &dy, &mut grad);
            offset += w;
        }
    }
    Ok(LossAndGradient {
        loss: 1.0 - report.ccc,
        grad,
        report,
        degenerate_labels,
    })
}

/// Accumulates into `grad` the gradient of `sum_t dy[t] * y[t]`.
fn backward(params: &RegressorParams, frames: &Matrix, cache: &ForwardCache, dy: &[f64], grad: &mut RegressorParams) {
    let h = params.hidden_dim();
    let d = params.input_dim();
    let uz = params.block(params.u_range(Gate::Update));
    let ur = params.block(params.u_range(Gate::Reset));
    let un = params.block(params.u_range(Gate::Candidate));
    let w_out = params.block(params.w_out_range());

    let ranges = |g: Gate| (grad.w_range(g), grad.u_range(g), grad.b_range(g));
    let (wz_r, uz_r, bz_r) = ranges(Gate::Update);
    let (wr_r, ur_r, br_r) = ranges(Gate::Reset);
    let (wn_r, un_r, bn_r) = ranges(Gate::Candidate);
    let wo_r = grad.w_out_range();
    let bo_i = grad.b_out_index();
    let g = grad.as_mut_slice();

    let mut dh_next = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut dhp = vec![0.0; h];
    let mut daz = vec![0.0; h];
    let mut dar = vec![0.0; h];
    let mut dan = vec![0.0; h];
    let mut rh = vec![0.0; h];

    for t in (0..frames.rows()).rev() {
        let x = frames.row(t);
        let hp = &cache.hidden[t * h..(t + 1) * h];
        let ht = &cache.hidden[(t + 1) * h..(t + 2) * h];
        let z = &cache.update[t * h..(t + 1) * h];
        let r = &cache.reset[t * h..(t + 1) * h];
        let n = &cache.candidate[t * h..(t + 1) * h];

        g[bo_i] += dy[t];
        for i in 0..h {
            g[wo_r.start + i] += dy[t] * ht[i];
            dh[i] = dh_next[i] + w_out[i] * dy[t];
        }
        for i in 0..h {
            let dn = dh[i] * (1.0 - z[i]);
            let dz = dh[i] * (hp[i] - n[i]);
            dhp[i] = dh[i] * z[i];
            dan[i] = dn * (1.0 - n[i] * n[i]);
            daz[i] = dz * z[i] * (1.0 - z[i]);
            rh[i] = r[i] * hp[i];
        }
        // candidate gate: input to U_n is r * h_prev
        for i in 0..h {
            let a = dan[i];
            g[bn_r.start + i] += a;
            for j in 0..d {
                g[wn_r.start + i * d + j] += a * x[j];
            }
            for j in 0..h {
                g[un_r.start + i * h + j] += a * rh[j];
            }
        }
        for j in 0..h {
            let drh: f64 = (0..h).map(|i| un[i * h + j] * dan[i]).sum();
            let dr = drh * hp[j];
            dhp[j] += drh * r[j];
            dar[j] = dr * r[j] * (1.0 - r[j]);
        }
        for i in 0..h {
            let (az, ar) = (daz[i], dar[i]);
            g[bz_r.start + i] += az;
            g[br_r.start + i] += ar;
            for j in 0..d {
                g[wz_r.start + i * d + j] += az * x[j];
                g[wr_r.start + i * d + j] += ar * x[j];
            }
            for j in 0..h {
                g[uz_r.start + i * h + j] += az * hp[j];
                g[ur_r.start + i * h + j] += ar * hp[j];
            }
        }
        for j in 0..h {
            let from_gates: f64 = (0..h).map(|i| uz[i * h + j] * daz[i] + ur[i * h + j] * dar[i]).sum();
            dh_next[j] = dhp[j] + from_gates;
        }
    }
}
