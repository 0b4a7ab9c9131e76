//! Optimization loop: forward-masked InfoNCE gradient, unmasked
//! decay-and-step update, optional bias raising, stage diagnostics.
//!
//! One epoch draws a fresh batch, recomputes the magnitude mask from the
//! full weights, evaluates the stop-gradient gradient under that mask and
//! applies `w <- (1 - eta*lambda) w - eta g` to every neuron, pruned or not.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::contrastive::{batch_gradient, batch_gradient_with_attention, LossReport};
use crate::data::{make_batch, ContrastiveBatch, FeatureProfile, NoiseSpec};
use crate::dictionary::Dictionary;
use crate::encoder::{EncoderState, Projection};
use crate::error::{Error, Result};
use crate::pruning::{magnitude_mask, PruneMask};
use crate::rng::{self, LabRng, RngCursor, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSchedule {
    pub enable_bias: bool,
    /// Epoch at which biases are seeded; `None` means `epochs / 4`.
    pub stage1_epoch: Option<usize>,
    /// Seed biases at the detected stage-1 epoch instead of the fixed one.
    pub auto_t1: bool,
}

impl Default for BiasSchedule {
    fn default() -> Self {
        BiasSchedule {
            enable_bias: false,
            stage1_epoch: None,
            auto_t1: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub lambda: f64,
    pub tau: f64,
    pub alpha: f64,
    pub epochs: usize,
    /// Batch entries `K` per epoch.
    pub batch_entries: usize,
    /// Negatives `S` per entry.
    pub negatives: usize,
    /// Initialization scale; `None` means `0.1 / sqrt(d1)`.
    pub sigma0: Option<f64>,
    pub bias: BiasSchedule,
    /// Also update `W_Q`, `W_K` (frozen at identity otherwise).
    pub train_attention: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            lambda: 1e-4,
            tau: 1.0,
            alpha: 0.0,
            epochs: 400,
            batch_entries: 16,
            negatives: 15,
            sigma0: None,
            bias: BiasSchedule::default(),
            train_attention: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::param(name, reason));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", format!("must be > 0, got {}", self.eta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", format!("must be >= 0, got {}", self.lambda));
        }
        if self.eta * self.lambda >= 1.0 {
            return bad("lambda", "eta * lambda must be < 1".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", format!("must be > 0, got {}", self.tau));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad("alpha", format!("must lie in [0, 1), got {}", self.alpha));
        }
        if self.batch_entries == 0 {
            return bad("batch_entries", "must be >= 1".into());
        }
        if self.negatives == 0 {
            return bad("negatives", "must be >= 1".into());
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0) {
                return bad("sigma0", format!("must be > 0, got {s}"));
            }
        }
        Ok(())
    }

    pub fn sigma0_for(&self, d1: usize) -> f64 {
        self.sigma0.unwrap_or(0.1 / (d1 as f64).sqrt())
    }

    pub fn stage1_epoch(&self) -> usize {
        self.bias.stage1_epoch.unwrap_or(self.epochs / 4)
    }
}

/// Shape of the encoder input and width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Neurons `m`.
    pub m: usize,
    /// Tokens per sample `L`.
    pub tokens: usize,
}

/// What the bias rule does on this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasRule {
    /// Set `b_i = sqrt(2 ln d / d) ||w_i||`.
    Seed { d: usize },
    /// `b_i <- max(b_i (1 + eta/d), b_i ||w_new|| / ||w_old||)`.
    Raise { d: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub loss: LossReport,
    pub mean_pos_logit: f64,
    pub mask: PruneMask,
}

/// One optimization step on `batch`; see the module docs for the order of
/// operations.
pub fn train_step(
    state: &mut EncoderState,
    batch: &ContrastiveBatch,
    cfg: &TrainConfig,
    bias: Option<BiasRule>,
) -> Result<StepReport> {
    let mask = magnitude_mask(&state.weights, cfg.alpha)?;
    state.mask = mask.active.clone();
    let grad = if cfg.train_attention {
        batch_gradient_with_attention(state, batch, cfg.tau, true)?
    } else {
        batch_gradient(state, batch, cfg.tau, true)?
    };
    let loss = LossReport::new(grad.infonce, state, cfg.lambda);
    let prev_norms = state.neuron_norms();

    let decay = 1.0 - cfg.eta * cfg.lambda;
    state.weights.mapv_inplace(|v| v * decay);
    state.weights.scaled_add(-cfg.eta, &grad.weights);
    if let Some((gq, gk)) = grad.attention {
        let d1 = state.d1();
        for (proj, g) in [(&mut state.attn_query, gq), (&mut state.attn_key, gk)] {
            let mut w = proj.to_matrix(d1);
            w.mapv_inplace(|v| v * decay);
            w.scaled_add(-cfg.eta, &g);
            *proj = Projection::Matrix(w);
        }
    }
    if let Some(rule) = bias {
        update_bias(state, &prev_norms, rule, cfg.eta);
    }
    Ok(StepReport {
        loss,
        mean_pos_logit: grad.mean_pos_logit,
        mask,
    })
}

/// Applies one bias rule given the neuron norms before the weight update.
pub fn update_bias(state: &mut EncoderState, prev_norms: &[f64], rule: BiasRule, eta: f64) {
    let norms = state.neuron_norms();
    match rule {
        BiasRule::Seed { d } => {
            let d = d as f64;
            let scale = (2.0 * d.ln() / d).max(0.0).sqrt();
            for (b, n) in state.biases.iter_mut().zip(&norms) {
                *b = scale * n;
            }
        }
        BiasRule::Raise { d } => {
            let growth = 1.0 + eta / d as f64;
            for ((b, new), old) in state.biases.iter_mut().zip(&norms).zip(prev_norms) {
                let by_norm = if *old > 0.0 { *b * new / old } else { 0.0 };
                *b = (*b * growth).max(by_norm);
            }
        }
    }
}

/// `||M M^T w_i||^2 / ||w_i||^2` per neuron (0 for zero neurons).
pub fn feature_mass_ratios(weights: &Array2<f64>, dict: &Dictionary) -> Vec<f64> {
    let proj = weights.dot(&dict.features().t());
    weights
        .rows()
        .into_iter()
        .zip(proj.rows())
        .map(|(w, p)| {
            let n = w.dot(&w);
            if n == 0.0 {
                0.0
            } else {
                p.dot(&p) / n
            }
        })
        .collect()
}

/// Stage diagnostics of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageObservation {
    pub feature_mass_ratio: Vec<f64>,
    /// `||w_i||^2 / ||w_i^(T1)||^2`, once stage 1 has been detected.
    pub norm_ratio: Option<Vec<f64>>,
    /// Every active neuron has at least half its mass in the feature span.
    pub t1_condition: bool,
    /// Some neuron has grown by a factor `d` in squared norm since T1.
    pub t2_condition: bool,
}

pub fn detect_stages(
    state: &EncoderState,
    dict: &Dictionary,
    t1_baseline_norms: Option<&[f64]>,
) -> StageObservation {
    let ratios = feature_mass_ratios(&state.weights, dict);
    let t1_condition = ratios
        .iter()
        .zip(&state.mask)
        .filter(|(_, keep)| **keep)
        .all(|(r, _)| *r >= 0.5);
    let norm_ratio = t1_baseline_norms.map(|base| {
        state
            .neuron_norms()
            .iter()
            .zip(base)
            .map(|(n, b)| if *b > 0.0 { n * n / (b * b) } else { f64::INFINITY })
            .collect::<Vec<_>>()
    });
    let t2_condition = norm_ratio
        .as_ref()
        .is_some_and(|r| r.iter().any(|x| *x >= dict.d() as f64));
    StageObservation {
        feature_mass_ratio: ratios,
        norm_ratio,
        t1_condition,
        t2_condition,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub t1_hit_epoch: Option<usize>,
    pub t2_hit_epoch: Option<usize>,
    pub t1_norms: Option<Vec<f64>>,
    pub per_epoch: Vec<StageObservation>,
}

/// One row of `training_log.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_infonce: f64,
    pub loss_total: f64,
    pub mean_pos_logit: f64,
    pub min_neuron_norm: f64,
    pub max_neuron_norm: f64,
    pub pruned_indices: String,
    pub t1_flag: u8,
    pub t2_flag: u8,
}

/// Stateful training run; owns the encoder and its training stream.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    dict: &'a Dictionary,
    profile: &'a FeatureProfile,
    noise: NoiseSpec,
    dims: ModelDims,
    cfg: TrainConfig,
    state: EncoderState,
    rng: LabRng,
    epoch: usize,
    stages: StageReport,
    bias_seeded: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(
        dict: &'a Dictionary,
        profile: &'a FeatureProfile,
        noise: NoiseSpec,
        dims: ModelDims,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let state = EncoderState::init(
            dims.m,
            dict.d1(),
            cfg.sigma0_for(dict.d1()),
            &mut rng::stream(cfg.seed, Stream::Init),
        )?;
        Self::resume(dict, profile, noise, dims, cfg, state, 0, None)
    }

    /// Continues from a saved state. `cursor` restores the training stream;
    /// `None` starts it fresh.
    #[allow(clippy::too_many_arguments)]
    pub fn resume(
        dict: &'a Dictionary,
        profile: &'a FeatureProfile,
        noise: NoiseSpec,
        dims: ModelDims,
        cfg: TrainConfig,
        state: EncoderState,
        epoch: usize,
        cursor: Option<&RngCursor>,
    ) -> Result<Self> {
        cfg.validate()?;
        state.validate()?;
        if profile.d() != dict.d() || state.d1() != dict.d1() || state.m() != dims.m {
            return Err(Error::dim("dictionary, profile, state and dims disagree"));
        }
        if dims.tokens == 0 {
            return Err(Error::param("tokens", "need at least one token"));
        }
        let rng = match cursor {
            Some(c) => c
                .restore()
                .ok_or_else(|| Error::param("rng_cursor", "unreadable word position"))?,
            None => rng::stream(cfg.seed, Stream::Train),
        };
        let bias_seeded = state.biases.iter().any(|b| *b > 0.0);
        Ok(Trainer {
            dict,
            profile,
            noise,
            dims,
            cfg,
            state,
            rng,
            epoch,
            stages: StageReport::default(),
            bias_seeded,
        })
    }

    pub fn state(&self) -> &EncoderState {
        &self.state
    }

    pub fn into_state(self) -> EncoderState {
        self.state
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn stages(&self) -> &StageReport {
        &self.stages
    }

    /// Reinstates stage detections after [`Trainer::resume`].
    pub fn restore_stages(&mut self, stages: StageReport) {
        self.stages = stages;
    }

    pub fn dictionary(&self) -> &'a Dictionary {
        self.dict
    }

    pub fn profile(&self) -> &'a FeatureProfile {
        self.profile
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn rng_cursor(&self) -> RngCursor {
        RngCursor::capture(self.cfg.seed, &self.rng)
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    fn bias_rule(&self) -> Option<BiasRule> {
        if !self.cfg.bias.enable_bias {
            return None;
        }
        let d = self.dict.d();
        if self.bias_seeded {
            return Some(BiasRule::Raise { d });
        }
        let reached = if self.cfg.bias.auto_t1 {
            self.stages.t1_hit_epoch.is_some()
        } else {
            self.epoch >= self.cfg.stage1_epoch()
        };
        reached.then_some(BiasRule::Seed { d })
    }

    /// Runs one epoch: fresh batch, step, bias rule, diagnostics.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let batch = make_batch(
            self.dict,
            self.profile,
            self.dims.tokens,
            self.noise,
            self.cfg.batch_entries,
            self.cfg.negatives,
            &mut self.rng,
        )?;
        let rule = self.bias_rule();
        let report = train_step(&mut self.state, &batch, &self.cfg, rule)?;
        if matches!(rule, Some(BiasRule::Seed { .. })) {
            self.bias_seeded = true;
        }
        let epoch = self.epoch;
        self.epoch += 1;

        let obs = detect_stages(&self.state, self.dict, self.stages.t1_norms.as_deref());
        if self.stages.t1_hit_epoch.is_none() && obs.t1_condition {
            self.stages.t1_hit_epoch = Some(epoch);
            self.stages.t1_norms = Some(self.state.neuron_norms());
        } else if self.stages.t2_hit_epoch.is_none() && obs.t2_condition {
            self.stages.t2_hit_epoch = Some(epoch);
        }
        self.stages.per_epoch.push(obs);

        let norms = self.state.neuron_norms();
        Ok(EpochRecord {
            epoch,
            loss_infonce: report.loss.infonce,
            loss_total: report.loss.total,
            mean_pos_logit: report.mean_pos_logit,
            min_neuron_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
            max_neuron_norm: norms.iter().copied().fold(0.0, f64::max),
            pruned_indices: report.mask.log_field(),
            t1_flag: self.stages.t1_hit_epoch.is_some() as u8,
            t2_flag: self.stages.t2_hit_epoch.is_some() as u8,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: EncoderState,
    pub log: Vec<EpochRecord>,
    pub stages: StageReport,
}

/// Full training run, deterministic in `cfg.seed`.
pub fn train(
    dict: &Dictionary,
    profile: &FeatureProfile,
    noise: NoiseSpec,
    dims: ModelDims,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(dict, profile, noise, dims, cfg.clone())?;
    let mut log = Vec::with_capacity(cfg.epochs);
    while !trainer.is_done() {
        log.push(trainer.run_epoch()?);
    }
    let stages = trainer.stages.clone();
    Ok(TrainOutcome {
        state: trainer.into_state(),
        log,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BatchEntry, LatentSignal, Sample};
    use crate::encoder::Projection;
    use ndarray::{arr1, arr2, Array1};

    fn sample(tokens: Array2<f64>) -> Sample {
        let l = tokens.ncols();
        Sample {
            noise: tokens.clone(),
            tokens,
            latent: LatentSignal {
                support: vec![],
                signs: vec![],
                magnitudes: Array2::zeros((l, 0)),
            },
        }
    }

    fn single_neuron(w: [f64; 2], bias: f64) -> EncoderState {
        EncoderState {
            weights: arr2(&[w]),
            biases: arr1(&[bias]),
            attn_query: Projection::Identity,
            attn_key: Projection::Identity,
            mask: vec![true],
            sigma0: 1.0,
        }
    }

    #[test]
    fn pure_decay_when_gradient_vanishes() {
        let mut state = single_neuron([0.6, -0.8], 10.0);
        let batch = ContrastiveBatch {
            entries: vec![BatchEntry {
                anchor: sample(arr2(&[[0.5], [0.1]])),
                positive: sample(arr2(&[[0.2], [0.3]])),
                negatives: vec![sample(arr2(&[[-0.4], [0.9]]))],
            }],
        };
        let cfg = TrainConfig {
            eta: 0.1,
            lambda: 0.5,
            ..TrainConfig::default()
        };
        let before = state.neuron_norms()[0];
        train_step(&mut state, &batch, &cfg, None).unwrap();
        let after = state.neuron_norms()[0];
        assert!((after / before - (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_step() {
        // d1 = 2, L = 1, S = 1, one neuron with zero bias.
        // f(X) = <w, x>; anchor x = (1, 0), positive y = (0.5, 0.5),
        // negative n = (-1, 1), w = (0.4, 0.2).
        let mut state = single_neuron([0.4, 0.2], 0.0);
        let batch = ContrastiveBatch {
            entries: vec![BatchEntry {
                anchor: sample(arr2(&[[1.0], [0.0]])),
                positive: sample(arr2(&[[0.5], [0.5]])),
                negatives: vec![sample(arr2(&[[-1.0], [1.0]]))],
            }],
        };
        let (eta, lambda, tau) = (0.1, 0.01, 0.5);
        let cfg = TrainConfig {
            eta,
            lambda,
            tau,
            ..TrainConfig::default()
        };
        let fx: f64 = 0.4;
        let fy: f64 = 0.4 * 0.5 + 0.2 * 0.5;
        let fn_: f64 = -0.4 + 0.2;
        let ep = (fx * fy / tau).exp();
        let en = (fx * fn_ / tau).exp();
        let lp = ep / (ep + en);
        let ls = en / (ep + en);
        let coeff = (lp - 1.0) * fy + ls * fn_;
        let expected = [(1.0 - eta * lambda) * 0.4 - eta * coeff * 1.0, (1.0 - eta * lambda) * 0.2];
        let report = train_step(&mut state, &batch, &cfg, None).unwrap();
        assert!((state.weights[[0, 0]] - expected[0]).abs() < 1e-14);
        assert!((state.weights[[0, 1]] - expected[1]).abs() < 1e-14);
        assert!((report.loss.infonce + lp.ln()).abs() < 1e-14);
        assert!((report.loss.total - report.loss.infonce - report.loss.reg).abs() < 1e-15);
    }

    #[test]
    fn masked_neuron_still_decays() {
        let dict = Dictionary::build(6, 2, 0).unwrap();
        let profile = FeatureProfile::balanced(2).unwrap();
        let mut rng = rng::stream(1, Stream::Train);
        let batch = make_batch(&dict, &profile, 2, NoiseSpec::from_nsr(0.3, 6).unwrap(), 4, 2, &mut rng).unwrap();
        let mut state = EncoderState::init(4, 6, 0.5, &mut rng::stream(1, Stream::Init)).unwrap();
        state.weights.row_mut(2).mapv_inplace(|v| v * 1e-3);
        let before = state.weights.row(2).to_owned();
        let cfg = TrainConfig {
            alpha: 0.25,
            lambda: 0.2,
            eta: 0.1,
            ..TrainConfig::default()
        };
        let report = train_step(&mut state, &batch, &cfg, None).unwrap();
        assert_eq!(report.mask.pruned_indices(), vec![2]);
        let expected = &before * (1.0 - 0.02);
        for (a, b) in state.weights.row(2).iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_rule_branches() {
        let mut state = single_neuron([1.0, 0.0], 0.5);
        update_bias(&mut state, &[1.0], BiasRule::Raise { d: 5 }, 0.05);
        assert!((state.biases[0] - 0.505).abs() < 1e-15);

        let mut state = single_neuron([2.0, 0.0], 0.5);
        update_bias(&mut state, &[1.0], BiasRule::Raise { d: 5 }, 0.05);
        assert!((state.biases[0] - 1.0).abs() < 1e-15);

        let mut state = single_neuron([3.0, 4.0], 0.0);
        update_bias(&mut state, &[5.0], BiasRule::Seed { d: 10 }, 0.05);
        let expected = (2.0 * 10f64.ln() / 10.0).sqrt() * 5.0;
        assert!((state.biases[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn stage_detection_examples() {
        let dict = Dictionary::build(8, 3, 0).unwrap();
        let mut state = single_neuron([0.0, 0.0], 0.0);
        state.weights = (dict.feature(0).to_owned() * 2.0).insert_axis(ndarray::Axis(0));
        assert!(detect_stages(&state, &dict, None).t1_condition);

        state.weights = dict.complement().row(1).to_owned().insert_axis(ndarray::Axis(0));
        let obs = detect_stages(&state, &dict, None);
        assert!(!obs.t1_condition);
        assert!(obs.feature_mass_ratio[0].abs() < 1e-12);

        let mixed: Array1<f64> =
            dict.feature(1).to_owned() * 0.6f64.sqrt() + &(dict.complement().row(0).to_owned() * 0.4f64.sqrt());
        state.weights = mixed.clone().insert_axis(ndarray::Axis(0));
        let obs = detect_stages(&state, &dict, Some(&[0.5]));
        let (fp, _) = dict.project_feature(mixed.view()).unwrap();
        assert!((obs.feature_mass_ratio[0] - fp.dot(&fp) / mixed.dot(&mixed)).abs() < 1e-12);
        assert!((obs.feature_mass_ratio[0] - 0.6).abs() < 1e-12);
        // ||w||^2 = 1 >= d * 0.25 is false for d = 3, but 1 / 0.25 = 4 >= 3.
        assert!(obs.t2_condition);
    }

    #[test]
    fn zero_epochs_is_a_noop() {
        let dict = Dictionary::build(10, 3, 0).unwrap();
        let profile = FeatureProfile::balanced(3).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&dict, &profile, NoiseSpec::from_nsr(0.2, 10).unwrap(), ModelDims { m: 4, tokens: 2 }, &cfg).unwrap();
        let init = EncoderState::init(4, 10, cfg.sigma0_for(10), &mut rng::stream(5, Stream::Init)).unwrap();
        assert_eq!(out.state, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let dict = Dictionary::build(12, 3, 0).unwrap();
        let profile = FeatureProfile::imbalanced(3, 1, 0.3).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            alpha: 0.2,
            seed: 9,
            batch_entries: 4,
            ..TrainConfig::default()
        };
        let run = || train(&dict, &profile, NoiseSpec::from_nsr(0.5, 12).unwrap(), ModelDims { m: 5, tokens: 2 }, &cfg).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.state, b.state);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn biases_never_decrease() {
        let dict = Dictionary::build(20, 4, 2).unwrap();
        let profile = FeatureProfile::balanced(4).unwrap();
        for seed in 0..5 {
            let cfg = TrainConfig {
                epochs: 40,
                seed,
                batch_entries: 4,
                bias: BiasSchedule {
                    enable_bias: true,
                    stage1_epoch: Some(5),
                    auto_t1: false,
                },
                ..TrainConfig::default()
            };
            let mut trainer =
                Trainer::new(&dict, &profile, NoiseSpec::from_nsr(0.3, 20).unwrap(), ModelDims { m: 6, tokens: 2 }, cfg).unwrap();
            let mut prev = trainer.state().biases.clone();
            while !trainer.is_done() {
                let before_seed = trainer.epoch() < 5;
                trainer.run_epoch().unwrap();
                let now = trainer.state().biases.clone();
                if before_seed {
                    assert!(now.iter().all(|b| *b == 0.0) || trainer.epoch() == 6);
                } else {
                    assert!(now.iter().zip(prev.iter()).all(|(n, p)| n >= p));
                }
                prev = now;
            }
            assert!(prev.iter().all(|b| *b > 0.0));
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { eta: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { tau: -1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { alpha: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
        assert_eq!(TrainConfig::default().stage1_epoch(), 100);
    }
}
