//! Downstream metrics: positive-pair cosine similarity of embeddings and a
//! ridge-regression probe onto the token-summed latent signal.

use ndarray::{Array1, Array2, Axis};

use crate::data::{make_positive_pair, FeatureProfile, NoiseSpec};
use crate::dictionary::Dictionary;
use crate::encoder::EncoderState;
use crate::error::{Error, Result};
use crate::rng::LabRng;

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Label stamped into outputs to name the regression target.
pub const PROBE_TARGET: &str = "latent_sum";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineReport {
    pub mean_cosine: f64,
    pub evaluated_pairs: usize,
    /// Pairs skipped because one side embedded to zero.
    pub degenerate_pairs: usize,
}

fn cosine(a: &Array1<f64>, b: &Array1<f64>) -> Option<f64> {
    let na = a.dot(a).sqrt();
    let nb = b.dot(b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Mean cosine between embeddings of fresh positive pairs.
pub fn mean_pair_cosine(
    state: &EncoderState,
    dict: &Dictionary,
    profile: &FeatureProfile,
    tokens: usize,
    n_pairs: usize,
    noise_spec: NoiseSpec,
    rng: &mut LabRng,
) -> Result<CosineReport> {
    if n_pairs == 0 {
        return Err(Error::param("n_pairs", "need at least one pair"));
    }
    let mut embeddings = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let (x, y) = make_positive_pair(dict, profile, tokens, noise_spec, rng)?;
        embeddings.push((state.embed(x.tokens.view())?, state.embed(y.tokens.view())?));
    }
    mean_cosine_of(&embeddings)
}

/// Mean cosine over precomputed embedding pairs.
pub fn mean_cosine_of(pairs: &[(Array1<f64>, Array1<f64>)]) -> Result<CosineReport> {
    let mut sum = 0.0;
    let mut used = 0;
    for (a, b) in pairs {
        if let Some(c) = cosine(a, b) {
            sum += c;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateEvaluation(format!(
            "all {} pairs have a zero embedding",
            pairs.len()
        )));
    }
    Ok(CosineReport {
        mean_cosine: sum / used as f64,
        evaluated_pairs: used,
        degenerate_pairs: pairs.len() - used,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    /// `m x d`.
    pub coefficients: Array2<f64>,
    /// Length `d`.
    pub intercept: Array1<f64>,
    pub fitted_on: usize,
}

impl ProbeModel {
    pub fn predict(&self, embeddings: &Array2<f64>) -> Array2<f64> {
        embeddings.dot(&self.coefficients) + &self.intercept
    }
}

/// Closed-form ridge regression with an unpenalized intercept.
pub fn fit_probe(embeddings: &Array2<f64>, targets: &Array2<f64>, ridge: f64) -> Result<ProbeModel> {
    let n = embeddings.nrows();
    if n == 0 || targets.nrows() != n {
        return Err(Error::dim(format!(
            "{} embeddings and {} targets",
            n,
            targets.nrows()
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::param("ridge", format!("must be >= 0, got {ridge}")));
    }
    let x_mean = embeddings.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = targets.mean_axis(Axis(0)).expect("n > 0");
    let xc = embeddings - &x_mean;
    let yc = targets - &y_mean;
    let mut gram = xc.t().dot(&xc);
    for i in 0..gram.nrows() {
        gram[[i, i]] += ridge;
    }
    let rhs = xc.t().dot(&yc);
    let coefficients = cholesky_solve(&gram, &rhs)?;
    let intercept = &y_mean - &x_mean.dot(&coefficients);
    Ok(ProbeModel {
        coefficients,
        intercept,
        fitted_on: n,
    })
}

/// Mean over samples and target coordinates of the squared residual.
pub fn probe_test_mse(model: &ProbeModel, embeddings: &Array2<f64>, targets: &Array2<f64>) -> Result<f64> {
    if embeddings.ncols() != model.coefficients.nrows()
        || targets.ncols() != model.coefficients.ncols()
        || embeddings.nrows() != targets.nrows()
    {
        return Err(Error::dim("probe, embeddings and targets disagree on shape"));
    }
    let resid = model.predict(embeddings) - targets;
    Ok(resid.mapv(|v| v * v).mean().unwrap_or(0.0))
}

/// Anchor embeddings and summed-latent targets of `n` fresh positive pairs.
pub fn probe_dataset(
    state: &EncoderState,
    dict: &Dictionary,
    profile: &FeatureProfile,
    tokens: usize,
    n: usize,
    noise_spec: NoiseSpec,
    rng: &mut LabRng,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut x = Array2::zeros((n, state.m()));
    let mut y = Array2::zeros((n, dict.d()));
    for k in 0..n {
        let (anchor, _positive) = make_positive_pair(dict, profile, tokens, noise_spec, rng)?;
        x.row_mut(k).assign(&state.embed(anchor.tokens.view())?);
        y.row_mut(k).assign(&anchor.latent.summed(dict.d()));
    }
    Ok((x, y))
}

fn cholesky_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 1e-13 * scale) {
            return Err(Error::Singular(format!("pivot {j} is {diag:e}")));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    let mut x = b.clone();
    for mut col in x.columns_mut() {
        for i in 0..n {
            let mut v = col[i];
            for k in 0..i {
                v -= l[[i, k]] * col[k];
            }
            col[i] = v / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut v = col[i];
            for k in (i + 1)..n {
                v -= l[[k, i]] * col[k];
            }
            col[i] = v / l[[i, i]];
        }
    }
    Ok(x)
}
