//! Sparse-coding data model: latent signals, noisy token sequences,
//! positive pairs and contrastive batches.
//!
//! A coordinate `j` is switched on for a whole sample with probability
//! `p_j = min(1, eps_j * base_rate)`. An active coordinate carries one sign
//! for all `L` tokens and an independent magnitude per token, which makes
//! the positive-pair condition (equal support and sign of the token sum)
//! hold exactly rather than with high probability.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::rng::LabRng;

/// Magnitude law of active latent coordinates: i.i.d. `Uniform[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnitudeLaw {
    pub lo: f64,
    pub hi: f64,
}

impl Default for MagnitudeLaw {
    fn default() -> Self {
        MagnitudeLaw { lo: 0.5, hi: 1.0 }
    }
}

impl MagnitudeLaw {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi <= 1.0) {
            return Err(Error::param(
                "magnitude",
                format!("need 0 < lo <= hi <= 1, got [{}, {}]", self.lo, self.hi),
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("uniform[{},{}]", self.lo, self.hi)
    }

    /// Always consumes exactly one draw, even for a point mass.
    fn draw(&self, rng: &mut LabRng) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }
}

pub const DEFAULT_BASE_RATE: f64 = 0.3;

/// Relative feature frequencies `eps_j` and the base activation rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    freqs: Vec<f64>,
    base_rate: f64,
    #[serde(default)]
    magnitude: MagnitudeLaw,
}

impl FeatureProfile {
    pub fn new(freqs: Vec<f64>, base_rate: f64) -> Result<Self> {
        Self::with_magnitude(freqs, base_rate, MagnitudeLaw::default())
    }

    pub fn with_magnitude(freqs: Vec<f64>, base_rate: f64, magnitude: MagnitudeLaw) -> Result<Self> {
        let profile = FeatureProfile {
            freqs,
            base_rate,
            magnitude,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// All `d` features with `eps = 1`.
    pub fn balanced(d: usize) -> Result<Self> {
        Self::new(vec![1.0; d], DEFAULT_BASE_RATE)
    }

    /// `d - minority` majority features at `eps = 1` followed by `minority`
    /// features at `eps_min`.
    pub fn imbalanced(d: usize, minority: usize, eps_min: f64) -> Result<Self> {
        if minority > d {
            return Err(Error::dim(format!("{minority} minority features but d = {d}")));
        }
        let mut freqs = vec![1.0; d];
        for f in freqs.iter_mut().skip(d - minority) {
            *f = eps_min;
        }
        Self::new(freqs, DEFAULT_BASE_RATE)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.is_empty() {
            return Err(Error::param("freqs", "at least one feature is required"));
        }
        if let Some(bad) = self.freqs.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::param("freqs", format!("eps_j must lie in (0, 1], got {bad}")));
        }
        if !(self.base_rate > 0.0 && self.base_rate <= 1.0) {
            return Err(Error::param(
                "base_rate",
                format!("must lie in (0, 1], got {}", self.base_rate),
            ));
        }
        self.magnitude.validate()
    }

    pub fn d(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn base_rate(&self) -> f64 {
        self.base_rate
    }

    pub fn magnitude(&self) -> MagnitudeLaw {
        self.magnitude
    }

    pub fn activation_prob(&self, j: usize) -> f64 {
        (self.freqs[j] * self.base_rate).min(1.0)
    }

    pub fn eps_max(&self) -> f64 {
        self.freqs.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn eps_min(&self) -> f64 {
        self.freqs.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Index of the rarest feature (lowest index on ties).
    pub fn minority_index(&self) -> usize {
        let min = self.eps_min();
        self.freqs.iter().position(|e| *e == min).unwrap_or(0)
    }
}

/// Isotropic token noise `N(0, sigma_xi_sq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_xi_sq: f64,
}

impl NoiseSpec {
    pub fn new(sigma_xi_sq: f64) -> Result<Self> {
        if !(sigma_xi_sq >= 0.0 && sigma_xi_sq.is_finite()) {
            return Err(Error::param("sigma_xi_sq", format!("must be >= 0, got {sigma_xi_sq}")));
        }
        Ok(NoiseSpec { sigma_xi_sq })
    }

    /// Noise-to-signal ratio parameterization, `sigma^2 = nsr / d1`.
    pub fn from_nsr(nsr: f64, d1: usize) -> Result<Self> {
        Self::new(nsr / d1 as f64)
    }

    pub fn nsr(&self, d1: usize) -> f64 {
        self.sigma_xi_sq * d1 as f64
    }
}

/// Latent code of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSignal {
    /// Active coordinates, ascending.
    pub support: Vec<usize>,
    /// `+1.0` or `-1.0`, one per supported coordinate.
    pub signs: Vec<f64>,
    /// `L x |support|` magnitudes.
    #[serde(with = "crate::nested::matrix")]
    pub magnitudes: Array2<f64>,
}

impl LatentSignal {
    pub fn tokens(&self) -> usize {
        self.magnitudes.nrows()
    }

    /// Dense `d x L` latent matrix `Z` with columns `z^(l)`.
    pub fn dense(&self, d: usize) -> Array2<f64> {
        let mut z = Array2::zeros((d, self.tokens()));
        for (k, (&j, &sign)) in self.support.iter().zip(&self.signs).enumerate() {
            for l in 0..self.tokens() {
                z[[j, l]] = sign * self.magnitudes[[l, k]];
            }
        }
        z
    }

    /// `sum_l z^(l)`.
    pub fn summed(&self, d: usize) -> Array1<f64> {
        let mut out = Array1::zeros(d);
        for (k, (&j, &sign)) in self.support.iter().zip(&self.signs).enumerate() {
            out[j] = sign * self.magnitudes.column(k).sum();
        }
        out
    }

    /// Redraws all `d x L` magnitudes and keeps the supported ones, so the
    /// draw count does not depend on the support.
    fn with_fresh_magnitudes(&self, d: usize, law: MagnitudeLaw, rng: &mut LabRng) -> Self {
        let len = self.tokens();
        let mut all = Array2::zeros((len, d));
        fill_uniform(&mut all, law, rng);
        let magnitudes = Array2::from_shape_fn((len, self.support.len()), |(l, c)| all[[l, self.support[c]]]);
        LatentSignal {
            support: self.support.clone(),
            signs: self.signs.clone(),
            magnitudes,
        }
    }
}

/// Token matrix with its generating latent and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// `d1 x L`.
    #[serde(with = "crate::nested::matrix")]
    pub tokens: Array2<f64>,
    pub latent: LatentSignal,
    /// `d1 x L`.
    #[serde(with = "crate::nested::matrix")]
    pub noise: Array2<f64>,
}

impl Sample {
    /// `M Z + Xi` from the stored parts.
    pub fn reconstruct(&self, dict: &Dictionary) -> Array2<f64> {
        dict.matrix().dot(&self.latent.dense(dict.d())) + &self.noise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub anchor: Sample,
    pub positive: Sample,
    pub negatives: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveBatch {
    pub entries: Vec<BatchEntry>,
}

impl ContrastiveBatch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn fill_uniform(a: &mut Array2<f64>, law: MagnitudeLaw, rng: &mut LabRng) {
    for v in a.iter_mut() {
        *v = law.draw(rng);
    }
}

/// Every coordinate consumes the same number of random draws whether or not
/// it is active, so runs that differ only in frequencies share their
/// randomness coordinate by coordinate.
pub fn sample_latent(profile: &FeatureProfile, tokens: usize, rng: &mut LabRng) -> Result<LatentSignal> {
    if tokens == 0 {
        return Err(Error::param("L", "need at least one token"));
    }
    let law = profile.magnitude();
    let mut support = Vec::new();
    let mut signs = Vec::new();
    let mut mags = Vec::new();
    let mut draws = vec![0.0; tokens];
    for j in 0..profile.d() {
        let u = rng.random::<f64>();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for v in draws.iter_mut() {
            *v = law.draw(rng);
        }
        if u < profile.activation_prob(j) {
            support.push(j);
            signs.push(sign);
            mags.extend_from_slice(&draws);
        }
    }
    // mags is |support| x L row-major; store transposed as L x |support|.
    let k = support.len();
    let magnitudes = Array2::from_shape_fn((tokens, k), |(l, c)| mags[c * tokens + l]);
    Ok(LatentSignal {
        support,
        signs,
        magnitudes,
    })
}

pub fn make_sample(
    dict: &Dictionary,
    latent: LatentSignal,
    noise_spec: NoiseSpec,
    rng: &mut LabRng,
) -> Result<Sample> {
    if latent.support.iter().any(|&j| j >= dict.d()) {
        return Err(Error::dim(format!(
            "latent support exceeds dictionary feature count {}",
            dict.d()
        )));
    }
    if latent.signs.len() != latent.support.len() || latent.magnitudes.ncols() != latent.support.len() {
        return Err(Error::dim("latent support, signs and magnitudes disagree"));
    }
    let d1 = dict.d1();
    let tokens_count = latent.tokens();
    let mut noise = Array2::zeros((d1, tokens_count));
    if noise_spec.sigma_xi_sq > 0.0 {
        let normal = Normal::new(0.0, noise_spec.sigma_xi_sq.sqrt())
            .map_err(|e| Error::param("sigma_xi_sq", e.to_string()))?;
        for v in noise.iter_mut() {
            *v = normal.sample(rng);
        }
    }
    let mut tokens = noise.clone();
    for (k, (&j, &sign)) in latent.support.iter().zip(&latent.signs).enumerate() {
        let feature = dict.feature(j);
        for l in 0..tokens_count {
            let coef = sign * latent.magnitudes[[l, k]];
            tokens.column_mut(l).scaled_add(coef, &feature);
        }
    }
    Ok(Sample {
        tokens,
        latent,
        noise,
    })
}

/// Draws a fresh sample from the profile.
pub fn draw_sample(
    dict: &Dictionary,
    profile: &FeatureProfile,
    tokens: usize,
    noise_spec: NoiseSpec,
    rng: &mut LabRng,
) -> Result<Sample> {
    let latent = sample_latent(profile, tokens, rng)?;
    make_sample(dict, latent, noise_spec, rng)
}

/// Two samples sharing support and signs; magnitudes and noise are redrawn
/// for the positive.
pub fn make_positive_pair(
    dict: &Dictionary,
    profile: &FeatureProfile,
    tokens: usize,
    noise_spec: NoiseSpec,
    rng: &mut LabRng,
) -> Result<(Sample, Sample)> {
    check_profile(dict, profile)?;
    let latent = sample_latent(profile, tokens, rng)?;
    let twin = latent.with_fresh_magnitudes(profile.d(), profile.magnitude(), rng);
    let anchor = make_sample(dict, latent, noise_spec, rng)?;
    let positive = make_sample(dict, twin, noise_spec, rng)?;
    Ok((anchor, positive))
}

pub fn make_batch(
    dict: &Dictionary,
    profile: &FeatureProfile,
    tokens: usize,
    noise_spec: NoiseSpec,
    entries: usize,
    negatives: usize,
    rng: &mut LabRng,
) -> Result<ContrastiveBatch> {
    if entries == 0 {
        return Err(Error::param("K", "batch needs at least one entry"));
    }
    if negatives == 0 {
        return Err(Error::param("S", "each entry needs at least one negative"));
    }
    let mut out = Vec::with_capacity(entries);
    for _ in 0..entries {
        let (anchor, positive) = make_positive_pair(dict, profile, tokens, noise_spec, rng)?;
        let negs = (0..negatives)
            .map(|_| draw_sample(dict, profile, tokens, noise_spec, rng))
            .collect::<Result<Vec<_>>>()?;
        out.push(BatchEntry {
            anchor,
            positive,
            negatives: negs,
        });
    }
    Ok(ContrastiveBatch { entries: out })
}

/// Positive-pair condition: equal support of the token-summed latents and
/// coordinatewise sign agreement.
pub fn is_positive_pair(a: &LatentSignal, b: &LatentSignal, d: usize) -> bool {
    let sa = a.summed(d);
    let sb = b.summed(d);
    sa.iter().zip(sb.iter()).all(|(x, y)| {
        let (x0, y0) = (*x == 0.0, *y == 0.0);
        x0 == y0 && (x0 || x.signum() == y.signum())
    })
}

fn check_profile(dict: &Dictionary, profile: &FeatureProfile) -> Result<()> {
    if profile.d() != dict.d() {
        return Err(Error::dim(format!(
            "profile has {} features, dictionary has {}",
            profile.d(),
            dict.d()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::SeedableRng;

    fn rng(seed: u64) -> LabRng {
        LabRng::seed_from_u64(seed)
    }

    #[test]
    fn vanishing_frequency_never_fires() {
        let profile = FeatureProfile::new(vec![1.0, 1e-9], 0.3).unwrap();
        let mut r = rng(1);
        for _ in 0..10_000 {
            let z = sample_latent(&profile, 2, &mut r).unwrap();
            assert!(!z.support.contains(&1));
        }
    }

    #[test]
    fn certain_frequency_always_fires() {
        let profile = FeatureProfile::new(vec![1.0, 0.5], 1.0).unwrap();
        let mut r = rng(2);
        for _ in 0..1000 {
            let z = sample_latent(&profile, 3, &mut r).unwrap();
            assert!(z.support.contains(&0));
        }
    }

    #[test]
    fn activation_frequency_matches_binomial() {
        let profile = FeatureProfile::new(vec![1.0, 0.4, 0.1], 0.3).unwrap();
        let mut r = rng(3);
        let n = 100_000;
        let mut hits = [0usize; 3];
        for _ in 0..n {
            let z = sample_latent(&profile, 1, &mut r).unwrap();
            for j in z.support {
                hits[j] += 1;
            }
        }
        for j in 0..3 {
            let p = profile.activation_prob(j);
            let freq = hits[j] as f64 / n as f64;
            let band = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= band, "j={j} freq={freq} p={p}");
        }
    }

    #[test]
    fn latent_sign_shared_across_tokens_and_bounded() {
        let profile = FeatureProfile::balanced(6).unwrap();
        let mut r = rng(4);
        for _ in 0..200 {
            let z = sample_latent(&profile, 4, &mut r).unwrap();
            let dense = z.dense(6);
            for j in 0..6 {
                let row = dense.row(j);
                if z.support.contains(&j) {
                    let s = row[0].signum();
                    assert!(row.iter().all(|v| v.signum() == s && (0.5..=1.0).contains(&v.abs())));
                } else {
                    assert!(row.iter().all(|v| *v == 0.0));
                }
            }
        }
    }

    #[test]
    fn noiseless_single_feature_token() {
        let dict = Dictionary::build(7, 3, 0).unwrap();
        let latent = LatentSignal {
            support: vec![0],
            signs: vec![1.0],
            magnitudes: Array2::from_elem((1, 1), 1.0),
        };
        let s = make_sample(&dict, latent, NoiseSpec::new(0.0).unwrap(), &mut rng(0)).unwrap();
        for r in 0..7 {
            assert_eq!(s.tokens[[r, 0]], dict.feature(0)[r]);
        }
    }

    #[test]
    fn empty_support_noiseless_is_zero() {
        let dict = Dictionary::build(5, 2, 0).unwrap();
        let latent = LatentSignal {
            support: vec![],
            signs: vec![],
            magnitudes: Array2::zeros((3, 0)),
        };
        let s = make_sample(&dict, latent, NoiseSpec::new(0.0).unwrap(), &mut rng(0)).unwrap();
        assert!(s.tokens.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noise_moments() {
        let d1 = 50;
        let dict = Dictionary::build(d1, 2, 0).unwrap();
        let profile = FeatureProfile::balanced(2).unwrap();
        let noise = NoiseSpec::new(0.04).unwrap();
        let mut r = rng(5);
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
        while n < 100_000 {
            let s = draw_sample(&dict, &profile, 2, noise, &mut r).unwrap();
            for v in s.noise.iter() {
                sum += v;
                sq += v * v;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() <= 3.0 * 0.2 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 0.04).abs() <= 0.05 * 0.04, "var {var}");
    }

    #[test]
    fn reconstruction_is_exact() {
        let dict = Dictionary::build(30, 6, 1).unwrap();
        let profile = FeatureProfile::imbalanced(6, 2, 0.2).unwrap();
        let mut r = rng(6);
        for _ in 0..20 {
            let s = draw_sample(&dict, &profile, 3, NoiseSpec::from_nsr(0.5, 30).unwrap(), &mut r).unwrap();
            let diff = &s.reconstruct(&dict) - &s.tokens;
            assert!(diff.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn positive_pairs_always_valid() {
        let dict = Dictionary::build(20, 5, 2).unwrap();
        let profile = FeatureProfile::imbalanced(5, 1, 0.3).unwrap();
        let noise = NoiseSpec::from_nsr(1.0, 20).unwrap();
        let mut r = rng(7);
        let mut saw_empty = false;
        for _ in 0..1000 {
            let (a, p) = make_positive_pair(&dict, &profile, 2, noise, &mut r).unwrap();
            assert!(is_positive_pair(&a.latent, &p.latent, 5));
            assert_eq!(a.latent.support, p.latent.support);
            let (sa, sp) = (a.latent.summed(5), p.latent.summed(5));
            for (&j, &sign) in a.latent.support.iter().zip(&a.latent.signs) {
                assert!(sp[j] * sign > 0.0 && sa[j] * sign > 0.0);
            }
            saw_empty |= a.latent.support.is_empty();
        }
        assert!(saw_empty || profile.activation_prob(0) > 0.5);
    }

    #[test]
    fn minimal_batch_and_determinism() {
        let dict = Dictionary::build(10, 3, 0).unwrap();
        let profile = FeatureProfile::balanced(3).unwrap();
        let noise = NoiseSpec::from_nsr(0.2, 10).unwrap();
        let b = make_batch(&dict, &profile, 2, noise, 1, 1, &mut stream(4, Stream::Train)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.entries[0].negatives.len(), 1);
        let b2 = make_batch(&dict, &profile, 2, noise, 1, 1, &mut stream(4, Stream::Train)).unwrap();
        assert_eq!(b, b2);
        assert!(make_batch(&dict, &profile, 2, noise, 0, 1, &mut rng(0)).is_err());
        assert!(make_batch(&dict, &profile, 2, noise, 1, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn anchor_and_negative_latents_uncorrelated() {
        let dict = Dictionary::build(8, 4, 0).unwrap();
        let profile = FeatureProfile::balanced(4).unwrap();
        let noise = NoiseSpec::new(0.0).unwrap();
        let b = make_batch(&dict, &profile, 1, noise, 10_000, 1, &mut rng(8)).unwrap();
        let xs: Vec<f64> = b.entries.iter().map(|e| e.anchor.latent.summed(4)[0]).collect();
        let ys: Vec<f64> = b.entries.iter().map(|e| e.negatives[0].latent.summed(4)[0]).collect();
        let rho = crate::stats::pearson(&xs, &ys);
        assert!(rho.abs() <= 3.0 / 100.0, "rho {rho}");
    }

    #[test]
    fn nsr_roundtrip() {
        let n = NoiseSpec::from_nsr(0.7, 350).unwrap();
        assert!((n.nsr(350) - 0.7).abs() < 1e-12);
        assert!(NoiseSpec::new(-1.0).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(FeatureProfile::new(vec![0.0, 1.0], 0.3).is_err());
        assert!(FeatureProfile::new(vec![1.0], 0.0).is_err());
        let p = FeatureProfile::imbalanced(4, 1, 0.25).unwrap();
        assert_eq!(p.minority_index(), 3);
        assert_eq!(p.eps_max(), 1.0);
        assert_eq!(p.eps_min(), 0.25);
    }
}
