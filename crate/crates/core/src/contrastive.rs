//! InfoNCE with a stop-gradient on the non-anchor branch.
//!
//! For anchor `X_k`, positive `Y_k` and negatives `X_{k,s}` the similarity is
//! `<f(X_k), StopGrad(f(Y))>`, and the per-neuron gradient is
//!
//! ```text
//! g_i = 1/K sum_k [ (l'_p - 1) h_i(Y_k) + sum_s l'_s h_i(X_{k,s}) ] grad_{w_i} h_i(X_k)
//! ```
//!
//! which is exactly the gradient of `tau * mean_k InfoNCE_k` when the
//! positive and negative embeddings are frozen constants. See
//! [`surrogate_objective`].

use ndarray::{Array1, Array2, ArrayView1};

use crate::data::ContrastiveBatch;
use crate::encoder::EncoderState;
use crate::error::{Error, Result};

/// Softmax probabilities of the positive and every negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitSet {
    pub pos: f64,
    pub negs: Vec<f64>,
    pub tau: f64,
    /// `ln(pos)`, computed without forming `pos` first.
    pub log_pos: f64,
}

impl LogitSet {
    pub fn total(&self) -> f64 {
        self.pos + self.negs.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub infonce: f64,
    pub reg: f64,
    pub total: f64,
}

impl LossReport {
    /// `reg = lambda/2 * ||theta_masked||_F^2` over neuron weights.
    pub fn new(infonce: f64, state: &EncoderState, lambda: f64) -> Self {
        let sq: f64 = state
            .weights
            .rows()
            .into_iter()
            .zip(&state.mask)
            .filter(|(_, keep)| **keep)
            .map(|(w, _)| w.dot(&w))
            .sum();
        let reg = 0.5 * lambda * sq;
        LossReport {
            infonce,
            reg,
            total: infonce + reg,
        }
    }
}

pub fn similarity(anchor: ArrayView1<'_, f64>, other: ArrayView1<'_, f64>) -> Result<f64> {
    if anchor.len() != other.len() {
        return Err(Error::dim(format!(
            "embeddings have lengths {} and {}",
            anchor.len(),
            other.len()
        )));
    }
    Ok(anchor.dot(&other))
}

/// Temperature softmax over `{pos_sim} ∪ neg_sims`.
pub fn logits(pos_sim: f64, neg_sims: &[f64], tau: f64) -> Result<LogitSet> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be > 0, got {tau}")));
    }
    if neg_sims.is_empty() {
        return Err(Error::param("negatives", "need at least one negative"));
    }
    let scaled_pos = pos_sim / tau;
    let scaled: Vec<f64> = neg_sims.iter().map(|s| s / tau).collect();
    let max = scaled.iter().copied().fold(scaled_pos, f64::max);
    let e_pos = (scaled_pos - max).exp();
    let e_negs: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let z = e_pos + e_negs.iter().sum::<f64>();
    Ok(LogitSet {
        pos: e_pos / z,
        negs: e_negs.iter().map(|e| e / z).collect(),
        tau,
        log_pos: scaled_pos - max - z.ln(),
    })
}

/// `-ln(l'_p)`.
pub fn infonce_loss(logit_set: &LogitSet) -> f64 {
    (-logit_set.log_pos).max(0.0)
}

/// Embeddings of the positives and negatives, held constant by the
/// stop-gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenBranches {
    pub positives: Vec<Array1<f64>>,
    pub negatives: Vec<Vec<Array1<f64>>>,
}

impl FrozenBranches {
    pub fn capture(state: &EncoderState, batch: &ContrastiveBatch, use_mask: bool) -> Result<Self> {
        let mask = effective_mask(state, use_mask);
        let mut positives = Vec::with_capacity(batch.len());
        let mut negatives = Vec::with_capacity(batch.len());
        for entry in &batch.entries {
            positives.push(state.forward_with_mask(entry.positive.tokens.view(), &mask)?.f);
            negatives.push(
                entry
                    .negatives
                    .iter()
                    .map(|n| Ok(state.forward_with_mask(n.tokens.view(), &mask)?.f))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(FrozenBranches {
            positives,
            negatives,
        })
    }
}

/// Gradient over neuron weights (and optionally attention) plus the loss
/// statistics of the same forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    /// `m x d1`, row `i` is `g_i`.
    pub weights: Array2<f64>,
    /// `(grad W_Q, grad W_K)` when requested.
    pub attention: Option<(Array2<f64>, Array2<f64>)>,
    /// Mean InfoNCE over entries.
    pub infonce: f64,
    /// Mean positive logit `l'_p` over entries.
    pub mean_pos_logit: f64,
}

pub fn batch_gradient(
    state: &EncoderState,
    batch: &ContrastiveBatch,
    tau: f64,
    use_mask: bool,
) -> Result<BatchGradient> {
    gradient_impl(state, batch, tau, use_mask, false, None)
}

/// As [`batch_gradient`], also differentiating through `W_Q` and `W_K`.
pub fn batch_gradient_with_attention(
    state: &EncoderState,
    batch: &ContrastiveBatch,
    tau: f64,
    use_mask: bool,
) -> Result<BatchGradient> {
    gradient_impl(state, batch, tau, use_mask, true, None)
}

/// Gradient formula evaluated with externally supplied branch constants.
pub fn batch_gradient_frozen(
    state: &EncoderState,
    batch: &ContrastiveBatch,
    tau: f64,
    use_mask: bool,
    frozen: &FrozenBranches,
) -> Result<BatchGradient> {
    gradient_impl(state, batch, tau, use_mask, false, Some(frozen))
}

/// `tau * mean_k -ln softmax` with the anchor embedding computed from
/// `state` and every other embedding taken from `frozen`. Its gradient in
/// the neuron weights is [`batch_gradient_frozen`].
pub fn surrogate_objective(
    state: &EncoderState,
    batch: &ContrastiveBatch,
    tau: f64,
    use_mask: bool,
    frozen: &FrozenBranches,
) -> Result<f64> {
    let mask = effective_mask(state, use_mask);
    let mut acc = 0.0;
    for (k, entry) in batch.entries.iter().enumerate() {
        let f = state.forward_with_mask(entry.anchor.tokens.view(), &mask)?.f;
        let pos = similarity(f.view(), frozen.positives[k].view())?;
        let negs = frozen.negatives[k]
            .iter()
            .map(|n| similarity(f.view(), n.view()))
            .collect::<Result<Vec<_>>>()?;
        acc += infonce_loss(&logits(pos, &negs, tau)?);
    }
    Ok(tau * acc / batch.len() as f64)
}

fn effective_mask(state: &EncoderState, use_mask: bool) -> Vec<bool> {
    if use_mask {
        state.mask.clone()
    } else {
        vec![true; state.m()]
    }
}

fn gradient_impl(
    state: &EncoderState,
    batch: &ContrastiveBatch,
    tau: f64,
    use_mask: bool,
    attention: bool,
    frozen: Option<&FrozenBranches>,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::param("batch", "batch is empty"));
    }
    let mask = effective_mask(state, use_mask);
    let (m, d1) = (state.m(), state.d1());
    // Live branches: entry k occupies slots [k * stride, (k + 1) * stride)
    // as anchor, positive, negatives. Frozen branches: anchors only.
    let stride = if frozen.is_some() {
        1
    } else {
        2 + batch.entries[0].negatives.len()
    };
    let mut views = Vec::with_capacity(batch.len() * stride);
    for entry in &batch.entries {
        views.push(entry.anchor.tokens.view());
        if frozen.is_none() {
            if entry.negatives.len() + 2 != stride {
                return Err(Error::dim("entries carry different numbers of negatives"));
            }
            views.push(entry.positive.tokens.view());
            views.extend(entry.negatives.iter().map(|n| n.tokens.view()));
        }
    }
    let fwd = state.forward_batch(&views, &mask)?;
    let len = fwd.tokens();

    let mut gate = Array2::<f64>::zeros((m, batch.len() * len));
    let mut anchor_mix = Array2::<f64>::zeros((d1, batch.len() * len));
    let mut attn_grad = attention.then(|| (Array2::<f64>::zeros((d1, d1)), Array2::<f64>::zeros((d1, d1))));
    let mut loss = 0.0;
    let mut pos_logit = 0.0;
    for k in 0..batch.len() {
        let a = k * stride;
        let (pos_f, neg_fs): (Array1<f64>, Vec<Array1<f64>>) = match frozen {
            Some(fr) => (fr.positives[k].clone(), fr.negatives[k].clone()),
            None => (
                fwd.embeddings.column(a + 1).to_owned(),
                (a + 2..a + stride).map(|c| fwd.embeddings.column(c).to_owned()).collect(),
            ),
        };
        let f = fwd.embeddings.column(a);
        let pos_sim = similarity(f, pos_f.view())?;
        let neg_sims = neg_fs
            .iter()
            .map(|n| similarity(f, n.view()))
            .collect::<Result<Vec<_>>>()?;
        let ls = logits(pos_sim, &neg_sims, tau)?;
        loss += infonce_loss(&ls);
        pos_logit += ls.pos;

        let mut coeff = &pos_f * (ls.pos - 1.0);
        for (neg, weight) in neg_fs.iter().zip(&ls.negs) {
            coeff.scaled_add(*weight, neg);
        }
        // grad_i += coeff_i * sum_r 1{active_ir} z_r
        for r in 0..len {
            let c = a * len + r;
            anchor_mix.column_mut(k * len + r).assign(&fwd.mixes[a].mixed.column(r));
            for i in 0..m {
                if fwd.preacts[[i, c]].abs() > state.biases[i] {
                    gate[[i, k * len + r]] = coeff[i];
                }
            }
        }

        if let Some((gq, gk)) = attn_grad.as_mut() {
            let trace = fwd.trace(a, &state.biases);
            let (q, kk) = state.attention_grad(batch.entries[k].anchor.tokens.view(), &trace, &coeff);
            *gq += &q;
            *gk += &kk;
        }
    }
    let mut grad = gate.dot(&anchor_mix.t());
    let scale = 1.0 / batch.len() as f64;
    grad.mapv_inplace(|v| v * scale);
    if let Some((gq, gk)) = attn_grad.as_mut() {
        gq.mapv_inplace(|v| v * scale);
        gk.mapv_inplace(|v| v * scale);
    }
    Ok(BatchGradient {
        weights: grad,
        attention: attn_grad,
        infonce: loss * scale,
        mean_pos_logit: pos_logit * scale,
    })
}
