//! Transformer-MLP embedding.
//!
//! Each token queries the whole sequence through one softmax attention head
//! (`W_V` fixed to the identity), the mixed tokens are scaled by `1/L`, and
//! `m` bilateral-ReLU neurons are summed over query positions:
//!
//! ```text
//! delta[r, i] = softmax_i( <W_Q x_r, W_K x_i> / sqrt(d1) )
//! z_r         = (1/L) sum_i delta[r, i] x_i
//! h_k(X)      = sum_r BReLU_{b_k}( <w_k, z_r> )
//! ```

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::LabRng;

/// `BReLU_b(s) = ReLU(s - b) - ReLU(-s - b)`.
#[inline]
pub fn brelu(s: f64, b: f64) -> f64 {
    if s > b {
        s - b
    } else if s < -b {
        s + b
    } else {
        0.0
    }
}

/// Subgradient of [`brelu`] in `s`; zero on the kink `|s| = b`.
#[inline]
pub fn brelu_grad(s: f64, b: f64) -> f64 {
    if s.abs() > b {
        1.0
    } else {
        0.0
    }
}

/// An attention projection; `Identity` avoids storing `d1 x d1` eyes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Identity,
    Matrix(#[serde(with = "crate::nested::matrix")] Array2<f64>),
}

impl Projection {
    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Projection::Identity => x.to_owned(),
            Projection::Matrix(w) => w.dot(&x),
        }
    }

    pub fn to_matrix(&self, d1: usize) -> Array2<f64> {
        match self {
            Projection::Identity => Array2::eye(d1),
            Projection::Matrix(w) => w.clone(),
        }
    }

    fn check(&self, d1: usize) -> Result<()> {
        match self {
            Projection::Matrix(w) if w.dim() != (d1, d1) => Err(Error::dim(format!(
                "attention projection is {:?}, expected ({d1}, {d1})",
                w.dim()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    /// `m x d1`, row `i` is neuron weight `w_i`.
    #[serde(with = "crate::nested::matrix")]
    pub weights: Array2<f64>,
    #[serde(with = "crate::nested::vector")]
    pub biases: Array1<f64>,
    pub attn_query: Projection,
    pub attn_key: Projection,
    /// `true` = neuron participates in the forward pass.
    pub mask: Vec<bool>,
    pub sigma0: f64,
}

impl EncoderState {
    /// Gaussian `N(0, sigma0^2 I)` neurons, zero biases, identity attention,
    /// all-true mask.
    pub fn init(m: usize, d1: usize, sigma0: f64, rng: &mut LabRng) -> Result<Self> {
        if m == 0 || d1 == 0 {
            return Err(Error::dim(format!("m = {m} and d1 = {d1} must be positive")));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::param("sigma0", format!("must be > 0, got {sigma0}")));
        }
        let mut weights = Array2::zeros((m, d1));
        for v in weights.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = sigma0 * g;
        }
        Ok(EncoderState {
            weights,
            biases: Array1::zeros(m),
            attn_query: Projection::Identity,
            attn_key: Projection::Identity,
            mask: vec![true; m],
            sigma0,
        })
    }

    /// Convenience wrapper seeding its own stream.
    pub fn init_seeded(m: usize, d1: usize, sigma0: f64, seed: u64) -> Result<Self> {
        let mut rng = crate::rng::stream(seed, crate::rng::Stream::Init);
        Self::init(m, d1, sigma0, &mut rng)
    }

    pub fn m(&self) -> usize {
        self.weights.nrows()
    }

    pub fn d1(&self) -> usize {
        self.weights.ncols()
    }

    pub fn neuron_norms(&self) -> Vec<f64> {
        self.weights.rows().into_iter().map(|w| w.dot(&w).sqrt()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.biases.len() != m || self.mask.len() != m {
            return Err(Error::dim(format!(
                "{m} neurons but {} biases and {} mask entries",
                self.biases.len(),
                self.mask.len()
            )));
        }
        if let Some(b) = self.biases.iter().find(|b| !(**b >= 0.0)) {
            return Err(Error::param("biases", format!("must be >= 0, got {b}")));
        }
        self.attn_query.check(self.d1())?;
        self.attn_key.check(self.d1())
    }

    /// Attention mixing of a `d1 x L` token matrix.
    pub fn attend(&self, x: ArrayView2<'_, f64>) -> Result<TokenMix> {
        let d1 = self.d1();
        if x.nrows() != d1 || x.ncols() == 0 {
            return Err(Error::dim(format!(
                "tokens are {:?}, expected ({d1}, L >= 1)",
                x.dim()
            )));
        }
        let len = x.ncols();
        let weights = if len == 1 {
            Array2::ones((1, 1))
        } else {
            let q = self.attn_query.apply(x);
            let k = self.attn_key.apply(x);
            let mut scores = q.t().dot(&k);
            scores.mapv_inplace(|v| v / (d1 as f64).sqrt());
            softmax_rows(&mut scores);
            scores
        };
        let mut mixed = x.dot(&weights.t());
        mixed.mapv_inplace(|v| v / len as f64);
        Ok(TokenMix { mixed, weights })
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
        self.forward_with_mask(x, &self.mask)
    }

    /// Forward pass under an explicit mask instead of `self.mask`.
    pub fn forward_with_mask(&self, x: ArrayView2<'_, f64>, mask: &[bool]) -> Result<ForwardTrace> {
        if mask.len() != self.m() {
            return Err(Error::dim(format!("mask has {} entries for {} neurons", mask.len(), self.m())));
        }
        let mix = self.attend(x)?;
        let mut preacts = self.weights.dot(&mix.mixed);
        zero_masked_rows(&mut preacts, mask);
        let active = Array2::from_shape_fn(preacts.dim(), |(i, r)| preacts[[i, r]].abs() > self.biases[i]);
        let h = activations(&preacts, &self.biases);
        let f = h.clone();
        Ok(ForwardTrace {
            mix,
            preacts,
            active,
            h,
            f,
        })
    }

    /// Forward pass over many samples sharing one token count, with a single
    /// matrix product for all preactivations.
    pub fn forward_batch(&self, xs: &[ArrayView2<'_, f64>], mask: &[bool]) -> Result<BatchForward> {
        if mask.len() != self.m() {
            return Err(Error::dim(format!("mask has {} entries for {} neurons", mask.len(), self.m())));
        }
        let len = xs.first().map_or(1, |x| x.ncols());
        let mut stacked = Array2::<f64>::zeros((self.d1(), xs.len() * len));
        let mut mixes = Vec::with_capacity(xs.len());
        for (n, x) in xs.iter().enumerate() {
            if x.ncols() != len {
                return Err(Error::dim(format!("sample {n} has {} tokens, expected {len}", x.ncols())));
            }
            let mix = self.attend(*x)?;
            stacked.slice_mut(s![.., n * len..(n + 1) * len]).assign(&mix.mixed);
            mixes.push(mix);
        }
        let mut preacts = self.weights.dot(&stacked);
        zero_masked_rows(&mut preacts, mask);
        let mut embeddings = Array2::<f64>::zeros((self.m(), xs.len()));
        for (i, row) in preacts.rows().into_iter().enumerate() {
            let b = self.biases[i];
            for n in 0..xs.len() {
                embeddings[[i, n]] = (n * len..(n + 1) * len).map(|c| brelu(row[c], b)).sum();
            }
        }
        Ok(BatchForward {
            mixes,
            preacts,
            embeddings,
            tokens: len,
        })
    }

    /// Embedding `f(X)` only.
    pub fn embed(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.f)
    }

    /// Gradients of `sum_i coeffs[i] * h_i(X)` with respect to `W_Q` and
    /// `W_K`, holding the activation pattern of `trace` fixed.
    pub fn attention_grad(
        &self,
        x: ArrayView2<'_, f64>,
        trace: &ForwardTrace,
        coeffs: &Array1<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let d1 = self.d1();
        let len = x.ncols();
        // g[:, r] = sum_i coeffs_i 1{active_ir} w_i
        let mut act = Array2::<f64>::zeros((self.m(), len));
        for ((i, r), a) in trace.active.indexed_iter() {
            if *a {
                act[[i, r]] = coeffs[i];
            }
        }
        let g = self.weights.t().dot(&act);
        // a[r, j] = <g_r, x_j> / L
        let mut a = g.t().dot(&x);
        a.mapv_inplace(|v| v / len as f64);
        let delta = &trace.mix.weights;
        let mut gs = Array2::<f64>::zeros((len, len));
        for r in 0..len {
            let mean: f64 = (0..len).map(|j| delta[[r, j]] * a[[r, j]]).sum();
            for j in 0..len {
                gs[[r, j]] = delta[[r, j]] * (a[[r, j]] - mean) / (d1 as f64).sqrt();
            }
        }
        let q = self.attn_query.apply(x);
        let k = self.attn_key.apply(x);
        let grad_q = k.dot(&gs.t()).dot(&x.t());
        let grad_k = q.dot(&gs).dot(&x.t());
        (grad_q, grad_k)
    }
}

/// Attention output and the row-stochastic attention matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMix {
    /// `d1 x L`, column `r` is `z_X^(r)`.
    pub mixed: Array2<f64>,
    /// `L x L`, `weights[r, i] = delta_{r,i}`.
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub mix: TokenMix,
    /// `m x L` preactivations `<w_i, z_X^(r)>`; zero rows for masked neurons.
    pub preacts: Array2<f64>,
    /// `m x L`, `|preact| > b_i`.
    pub active: Array2<bool>,
    pub h: Array1<f64>,
    pub f: Array1<f64>,
}

impl ForwardTrace {
    /// `grad_{w_i} h_i(X) = sum_r 1{|<w_i, z_r>| > b_i} z_r`.
    pub fn neuron_grad(&self, i: usize) -> Array1<f64> {
        let mut out = Array1::zeros(self.mix.mixed.nrows());
        for (r, a) in self.active.row(i).iter().enumerate() {
            if *a {
                out += &self.mix.mixed.column(r);
            }
        }
        out
    }

    /// Recomputes `h` from the stored preactivations.
    pub fn recompute_h(&self, biases: &Array1<f64>) -> Array1<f64> {
        activations(&self.preacts, biases)
    }
}

fn activations(preacts: &Array2<f64>, biases: &Array1<f64>) -> Array1<f64> {
    Array1::from_iter(
        preacts
            .axis_iter(Axis(0))
            .zip(biases)
            .map(|(row, &b)| row.iter().map(|&s| brelu(s, b)).sum()),
    )
}

fn zero_masked_rows(preacts: &mut Array2<f64>, mask: &[bool]) {
    for (mut row, &on) in preacts.rows_mut().into_iter().zip(mask) {
        if !on {
            row.fill(0.0);
        }
    }
}

/// Output of [`EncoderState::forward_batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchForward {
    pub mixes: Vec<TokenMix>,
    /// `m x (N L)`, sample `n` owns columns `n L .. (n + 1) L`.
    pub preacts: Array2<f64>,
    /// `m x N`, column `n` is `f(X_n)`.
    pub embeddings: Array2<f64>,
    tokens: usize,
}

impl BatchForward {
    pub fn len(&self) -> usize {
        self.mixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixes.is_empty()
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    /// Single-sample trace for sample `n`.
    pub fn trace(&self, n: usize, biases: &Array1<f64>) -> ForwardTrace {
        let len = self.tokens;
        let preacts = self.preacts.slice(s![.., n * len..(n + 1) * len]).to_owned();
        let active = Array2::from_shape_fn(preacts.dim(), |(i, r)| preacts[[i, r]].abs() > biases[i]);
        ForwardTrace {
            mix: self.mixes[n].clone(),
            preacts,
            active,
            h: self.embeddings.column(n).to_owned(),
            f: self.embeddings.column(n).to_owned(),
        }
    }
}

fn softmax_rows(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::Dictionary;
    use ndarray::{arr2, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> LabRng {
        LabRng::seed_from_u64(seed)
    }

    #[test]
    fn batch_forward_matches_per_sample() {
        let mut r = rng(4);
        let mut state = EncoderState::init(5, 7, 0.4, &mut r).unwrap();
        state.biases = Array1::from(vec![0.0, 0.05, 0.3, 0.0, 0.1]);
        let mask = vec![true, false, true, true, true];
        let xs: Vec<Array2<f64>> = (0..4)
            .map(|_| Array2::from_shape_fn((7, 3), |_| r.random::<f64>() - 0.5))
            .collect();
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        let batch = state.forward_batch(&views, &mask).unwrap();
        assert_eq!(batch.len(), 4);
        for (n, x) in xs.iter().enumerate() {
            let single = state.forward_with_mask(x.view(), &mask).unwrap();
            let traced = batch.trace(n, &state.biases);
            for i in 0..5 {
                assert!((batch.embeddings[[i, n]] - single.f[i]).abs() < 1e-12);
                assert!((traced.h[i] - single.h[i]).abs() < 1e-12);
            }
        }
        let short = Array2::zeros((7, 2));
        assert!(state.forward_batch(&[xs[0].view(), short.view()], &mask).is_err());
    }

    #[test]
    fn brelu_piecewise() {
        assert_eq!(brelu(2.0, 1.0), 1.0);
        assert_eq!(brelu(-2.0, 1.0), -1.0);
        assert_eq!(brelu(0.5, 1.0), 0.0);
        assert_eq!(brelu(1.0, 1.0), 0.0);
        assert_eq!(brelu_grad(1.0, 1.0), 0.0);
        assert_eq!(brelu_grad(-1.5, 1.0), 1.0);
        for s in [-3.2, -0.1, 0.0, 0.7, 9.0] {
            assert_eq!(brelu(s, 0.0), s);
        }
    }

    #[test]
    fn brelu_is_odd() {
        let mut r = rng(9);
        for _ in 0..10_000 {
            let s: f64 = r.random_range(-5.0..5.0);
            let b: f64 = r.random_range(0.0..3.0);
            assert_eq!(brelu(-s, b), -brelu(s, b));
        }
    }

    #[test]
    fn init_rejects_zero_scale() {
        assert!(EncoderState::init(3, 4, 0.0, &mut rng(0)).is_err());
    }

    #[test]
    fn init_norm_and_cosine_statistics() {
        let (m, d1, sigma0) = (1000, 500, 0.02);
        let state = EncoderState::init(m, d1, sigma0, &mut rng(1)).unwrap();
        let mean_sq: f64 = state.neuron_norms().iter().map(|n| n * n).sum::<f64>() / m as f64;
        let target = sigma0 * sigma0 * d1 as f64;
        assert!((mean_sq / target - 1.0).abs() < 0.05, "{mean_sq} vs {target}");

        let dict = Dictionary::build(d1, 1, 3).unwrap();
        let u = dict.feature(0);
        let mean_cos_sq: f64 = state
            .weights
            .rows()
            .into_iter()
            .map(|w| w.dot(&u).powi(2) / w.dot(&w))
            .sum::<f64>()
            / m as f64;
        assert!((mean_cos_sq - 0.002).abs() < 0.0005, "{mean_cos_sq}");
        assert!(state.biases.iter().all(|b| *b == 0.0));
        assert!(state.mask.iter().all(|m| *m));
    }

    fn identity_state(weights: Array2<f64>) -> EncoderState {
        let m = weights.nrows();
        EncoderState {
            weights,
            biases: Array1::zeros(m),
            attn_query: Projection::Identity,
            attn_key: Projection::Identity,
            mask: vec![true; m],
            sigma0: 1.0,
        }
    }

    #[test]
    fn singleton_attention() {
        let state = identity_state(Array2::zeros((1, 3)));
        let x = arr2(&[[1.0], [2.0], [3.0]]);
        let mix = state.attend(x.view()).unwrap();
        assert_eq!(mix.weights, arr2(&[[1.0]]));
        assert_eq!(mix.mixed, x);
    }

    #[test]
    fn identical_tokens_split_evenly() {
        let state = identity_state(Array2::zeros((1, 2)));
        let x = arr2(&[[0.3, 0.3], [-1.0, -1.0]]);
        let mix = state.attend(x.view()).unwrap();
        for v in mix.weights.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_matches_brute_force_softmax() {
        let x = arr2(&[[0.2, -1.0, 0.5], [1.5, 0.3, -0.7], [0.0, 0.9, 1.1], [-0.4, 0.2, 0.6]]);
        let mut rq = Array2::zeros((4, 4));
        let mut rk = Array2::zeros((4, 4));
        let mut r = rng(4);
        rq.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        rk.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        let mut state = identity_state(Array2::zeros((1, 4)));
        state.attn_query = Projection::Matrix(rq.clone());
        state.attn_key = Projection::Matrix(rk.clone());
        let mix = state.attend(x.view()).unwrap();
        for row in 0..3 {
            let mut scores = [0.0f64; 3];
            for (col, s) in scores.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..4 {
                    let mut qa = 0.0;
                    let mut ka = 0.0;
                    for b in 0..4 {
                        qa += rq[[a, b]] * x[[b, row]];
                        ka += rk[[a, b]] * x[[b, col]];
                    }
                    acc += qa * ka;
                }
                *s = acc / 2.0;
            }
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for col in 0..3 {
                assert!((mix.weights[[row, col]] - scores[col].exp() / z).abs() < 1e-12);
            }
            assert!((mix.weights.row(row).sum() - 1.0).abs() < 1e-10);
            for a in 0..4 {
                let expected: f64 =
                    (0..3).map(|c| scores[c].exp() / z * x[[a, c]]).sum::<f64>() / 3.0;
                assert!((mix.mixed[[a, row]] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_computed_forward() {
        let dict = Dictionary::build(5, 2, 0).unwrap();
        let w = dict.feature(0).to_owned().insert_axis(Axis(0));
        let state = identity_state(w);
        let x = dict.feature(0).to_owned().insert_axis(Axis(1));
        let trace = state.forward(x.view()).unwrap();
        assert!((trace.preacts[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((trace.f[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dead_and_masked_neurons() {
        let mut r = rng(5);
        let mut state = EncoderState::init(3, 6, 0.5, &mut r).unwrap();
        let x = Array2::from_shape_fn((6, 2), |(a, b)| (a as f64 - 2.0) * 0.3 + b as f64 * 0.1);
        let trace = state.forward(x.view()).unwrap();
        let max_pre = trace.preacts.row(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        state.biases[0] = max_pre + 1.0;
        state.mask[2] = false;
        let trace = state.forward(x.view()).unwrap();
        assert_eq!(trace.f[0], 0.0);
        assert_eq!(trace.f[2], 0.0);
        assert_eq!(trace.h[2], 0.0);
        assert!(trace.f[1] != 0.0);
        let again = trace.recompute_h(&state.biases);
        for i in 0..3 {
            assert!((again[i] - trace.h[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_token_dimension() {
        let state = identity_state(Array2::zeros((2, 4)));
        assert!(state.forward(Array2::zeros((3, 2)).view()).is_err());
    }

    proptest! {
        #[test]
        fn attention_rows_are_stochastic(vals in proptest::collection::vec(-3.0f64..3.0, 12)) {
            let x = Array2::from_shape_vec((4, 3), vals).unwrap();
            let state = identity_state(Array2::zeros((1, 4)));
            let mix = state.attend(x.view()).unwrap();
            for row in mix.weights.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-10);
                prop_assert!(row.iter().all(|v| *v >= 0.0));
            }
        }

        #[test]
        fn positively_homogeneous_at_zero_bias(
            vals in proptest::collection::vec(-2.0f64..2.0, 10),
            ws in proptest::collection::vec(-1.0f64..1.0, 10),
            c in 0.01f64..10.0,
        ) {
            let x = Array2::from_shape_vec((5, 2), vals).unwrap();
            let w = Array2::from_shape_vec((2, 5), ws).unwrap();
            let base = identity_state(w.clone());
            let scaled = identity_state(w * c);
            let f0 = base.embed(x.view()).unwrap();
            let f1 = scaled.embed(x.view()).unwrap();
            for i in 0..2 {
                prop_assert!((f1[i] - c * f0[i]).abs() < 1e-10 * (1.0 + f1[i].abs()));
            }
        }
    }
}
