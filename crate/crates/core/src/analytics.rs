//! Neuron/feature alignment and the neuron taxonomy.
//!
//! These diagnostics use the true dictionary and the true feature
//! frequencies; they are measurement tools, not part of the learner.

use ndarray::{Array1, Array2};

use crate::data::FeatureProfile;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

pub const DEFAULT_ALIGN_THRESHOLD: f64 = 0.3;
pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// `m x d`, `<w_i, M_j>^2 / (||w_i||^2 ||M_j||^2)`.
    pub sq_cos: Array2<f64>,
    /// `m x d`, absolute cosines.
    pub abs_cos: Array2<f64>,
    /// Per feature, the largest absolute cosine over neurons.
    pub per_feature_max: Vec<f64>,
    /// Per feature, neurons with `abs_cos >= threshold`.
    pub counts_ge: Vec<usize>,
    pub threshold: f64,
    /// Neurons with zero norm; their rows are all zero.
    pub zero_norm: Vec<usize>,
}

pub fn alignment_matrix(weights: &Array2<f64>, dict: &Dictionary, threshold: f64) -> Result<AlignmentReport> {
    if weights.ncols() != dict.d1() {
        return Err(Error::dim(format!(
            "weights have {} columns, dictionary d1 = {}",
            weights.ncols(),
            dict.d1()
        )));
    }
    let (m, d) = (weights.nrows(), dict.d());
    let proj = weights.dot(&dict.features().t());
    let mut sq_cos = Array2::zeros((m, d));
    let mut abs_cos = Array2::zeros((m, d));
    let mut zero_norm = Vec::new();
    for i in 0..m {
        let w = weights.row(i);
        let norm_sq = w.dot(&w);
        if norm_sq == 0.0 {
            zero_norm.push(i);
            continue;
        }
        for j in 0..d {
            let mj = dict.feature(j);
            let mj_sq = mj.dot(&mj);
            let c = (proj[[i, j]] * proj[[i, j]] / (norm_sq * mj_sq)).min(1.0);
            sq_cos[[i, j]] = c;
            abs_cos[[i, j]] = c.sqrt();
        }
    }
    if !zero_norm.is_empty() {
        log::warn!("{} zero-norm neurons in alignment matrix", zero_norm.len());
    }
    let per_feature_max = (0..d)
        .map(|j| abs_cos.column(j).iter().copied().fold(0.0, f64::max))
        .collect();
    let counts_ge = (0..d)
        .map(|j| abs_cos.column(j).iter().filter(|c| **c >= threshold).count())
        .collect();
    Ok(AlignmentReport {
        sq_cos,
        abs_cos,
        per_feature_max,
        counts_ge,
        threshold,
        zero_norm,
    })
}

/// Qualitative patterns of a squared-cosine heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapPatterns {
    /// Per feature, neurons with `sq_cos >= strong` there and `< weak` on
    /// every other feature.
    pub single_feature: Vec<Vec<usize>>,
    /// Neurons with at least two entries in `[weak, strong]`.
    pub mixed: Vec<usize>,
}

pub fn heatmap_patterns(sq_cos: &Array2<f64>, strong: f64, weak: f64) -> HeatmapPatterns {
    let (m, d) = sq_cos.dim();
    let mut single_feature = vec![Vec::new(); d];
    let mut mixed = Vec::new();
    for i in 0..m {
        let row = sq_cos.row(i);
        for j in 0..d {
            if row[j] >= strong && (0..d).all(|k| k == j || row[k] < weak) {
                single_feature[j].push(i);
            }
        }
        if row.iter().filter(|v| (weak..=strong).contains(*v)).count() >= 2 {
            mixed.push(i);
        }
    }
    HeatmapPatterns { single_feature, mixed }
}

/// Ordinary/lucky neuron sets with their thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronTaxonomy {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    /// `lucky[j]`: neurons clearing the strong threshold on `j` and the weak
    /// threshold nowhere else.
    pub lucky: Vec<Vec<usize>>,
    /// `ordinary[j]`: neurons clearing the weak threshold on `j`.
    pub ordinary: Vec<Vec<usize>>,
    /// `dominant[i] = { j : i in ordinary[j] }`.
    pub dominant: Vec<Vec<usize>>,
}

/// `(c1, c2)` for a profile and margin `gamma`.
pub fn taxonomy_constants(profile: &FeatureProfile, gamma: f64) -> (f64, f64) {
    let ratio = profile.eps_max() / profile.eps_min();
    let c1 = ratio * ratio * 2.0 * (1.0 + gamma);
    let c2 = 2.0 * (1.0 - gamma) / (ratio * ratio);
    (c1, c2)
}

pub fn classify_neurons(
    weights: &Array2<f64>,
    dict: &Dictionary,
    profile: &FeatureProfile,
    gamma: f64,
) -> Result<NeuronTaxonomy> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param("gamma", format!("must lie in [0, 1), got {gamma}")));
    }
    if profile.d() != dict.d() || weights.ncols() != dict.d1() {
        return Err(Error::dim("weights, dictionary and profile disagree on dimensions"));
    }
    let (c1, c2) = taxonomy_constants(profile, gamma);
    let d = dict.d();
    let m = weights.nrows();
    let log_ratio = (d as f64).ln() / d as f64;
    let proj = weights.dot(&dict.features().t());
    let mut lucky = vec![Vec::new(); d];
    let mut ordinary = vec![Vec::new(); d];
    let mut dominant = vec![Vec::new(); m];
    for i in 0..m {
        let row = proj.row(i);
        let mass: f64 = row.iter().map(|v| v * v).sum();
        if mass == 0.0 {
            continue;
        }
        let weak = c2 * log_ratio * mass;
        let strong = c1 * log_ratio * mass;
        for j in 0..d {
            let p = row[j] * row[j];
            if p >= weak {
                ordinary[j].push(i);
                dominant[i].push(j);
            }
            if p >= strong
                && (0..d).all(|k| k == j || row[k] * row[k] <= weak)
            {
                lucky[j].push(i);
            }
        }
    }
    let taxonomy = NeuronTaxonomy {
        gamma,
        c1,
        c2,
        lucky,
        ordinary,
        dominant,
    };
    debug_assert!(taxonomy.is_nested());
    Ok(taxonomy)
}

impl NeuronTaxonomy {
    /// `lucky[j] ⊆ ordinary[j]` for every feature.
    pub fn is_nested(&self) -> bool {
        self.lucky
            .iter()
            .zip(&self.ordinary)
            .all(|(l, o)| l.iter().all(|i| o.contains(i)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEnergy {
    pub values: Vec<f64>,
}

/// `F_j = sum_{i in ordinary[j]} <w_i, M_j>^2`.
pub fn feature_energy(taxonomy: &NeuronTaxonomy, weights: &Array2<f64>, dict: &Dictionary) -> FeatureEnergy {
    let values = taxonomy
        .ordinary
        .iter()
        .enumerate()
        .map(|(j, members)| {
            let mj = dict.feature(j);
            members.iter().map(|&i| weights.row(i).dot(&mj).powi(2)).sum()
        })
        .collect();
    FeatureEnergy { values }
}

/// Sample statistics of freshly initialized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct InitStatistics {
    /// `mean_i ||w_i||^2`.
    pub mean_norm_sq: f64,
    /// `mean_i ||M M^T w_i||^2`.
    pub mean_feature_mass: f64,
    pub lucky_counts: Vec<usize>,
    pub ordinary_counts: Vec<usize>,
    /// `dominant_histogram[k]` = number of neurons with `|N_i| = k`.
    pub dominant_histogram: Vec<usize>,
}

impl InitStatistics {
    /// Relative deviation of the measured norms from `sigma0^2 d1` and of the
    /// feature mass from `sigma0^2 d`.
    pub fn relative_errors(&self, sigma0: f64, d1: usize, d: usize) -> (f64, f64) {
        let s2 = sigma0 * sigma0;
        (
            (self.mean_norm_sq / (s2 * d1 as f64) - 1.0).abs(),
            (self.mean_feature_mass / (s2 * d as f64) - 1.0).abs(),
        )
    }
}

pub fn initialization_statistics(
    weights: &Array2<f64>,
    dict: &Dictionary,
    profile: &FeatureProfile,
    gamma: f64,
) -> Result<InitStatistics> {
    let taxonomy = classify_neurons(weights, dict, profile, gamma)?;
    let m = weights.nrows() as f64;
    let norms: Array1<f64> = weights.rows().into_iter().map(|w| w.dot(&w)).collect();
    let proj = weights.dot(&dict.features().t());
    let mass: f64 = proj.iter().map(|v| v * v).sum();
    let mut hist = vec![0usize; dict.d() + 1];
    for n in &taxonomy.dominant {
        hist[n.len()] += 1;
    }
    Ok(InitStatistics {
        mean_norm_sq: norms.sum() / m,
        mean_feature_mass: mass / m,
        lucky_counts: taxonomy.lucky.iter().map(Vec::len).collect(),
        ordinary_counts: taxonomy.ordinary.iter().map(Vec::len).collect(),
        dominant_histogram: hist,
    })
}
