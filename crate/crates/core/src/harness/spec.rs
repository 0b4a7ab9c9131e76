//! Experiment specification files.
//!
//! A spec names an experiment kind and overrides any subset of that kind's
//! defaults. Loading merges the user JSON over the defaults before
//! deserializing, so a minimal file such as `{"kind": "heatmap"}` is valid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{FeatureProfile, MagnitudeLaw, NoiseSpec, DEFAULT_BASE_RATE};
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_RIDGE;
use crate::analytics::{DEFAULT_ALIGN_THRESHOLD, DEFAULT_GAMMA};
use crate::trainer::{ModelDims, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AlignmentSweep,
    CosineSweep,
    MseSweep,
    Heatmap,
    StageProbe,
    PruneAb,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::AlignmentSweep => "alignment_sweep",
            ExperimentKind::CosineSweep => "cosine_sweep",
            ExperimentKind::MseSweep => "mse_sweep",
            ExperimentKind::Heatmap => "heatmap",
            ExperimentKind::StageProbe => "stage_probe",
            ExperimentKind::PruneAb => "prune_ab",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub eps_min: Vec<f64>,
    pub nsr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub d1: usize,
    pub d: usize,
    pub m: usize,
    pub tokens: usize,
}

impl Dims {
    pub fn model(&self) -> ModelDims {
        ModelDims {
            m: self.m,
            tokens: self.tokens,
        }
    }
}

/// Frequency structure: `minority_count` trailing features at `eps_min`,
/// the rest at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub minority_count: usize,
    pub base_rate: f64,
    pub magnitude: MagnitudeLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    /// Positive pairs for the mean-cosine metric.
    pub test_pairs: usize,
    pub probe_train_pairs: usize,
    pub probe_test_pairs: usize,
    pub ridge: f64,
    pub align_threshold: f64,
    pub gamma: f64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            test_pairs: 5000,
            probe_train_pairs: 1000,
            probe_test_pairs: 5000,
            ridge: DEFAULT_RIDGE,
            align_threshold: DEFAULT_ALIGN_THRESHOLD,
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub grid: Grid,
    /// Repetitions; repetition `r` uses seed `seed + r`.
    pub reps: usize,
    pub seed: u64,
    pub dims: Dims,
    pub profile: ProfileSpec,
    /// `train.seed` is replaced by the repetition seed.
    pub train: TrainConfig,
    pub eval: EvalSpec,
    /// Pruning ratios compared against the unpruned arm (`prune_ab` only).
    pub prune_alphas: Vec<f64>,
    pub output_dir: PathBuf,
}

fn steps(count: usize, step_percent: usize) -> Vec<f64> {
    (1..=count).map(|i| (i * step_percent) as f64 / 100.0).collect()
}

/// `sigma^2 d1` for `sigma` given in hundredths.
fn nsr_levels(sigmas_hundredths: &[f64], d1: usize) -> Vec<f64> {
    sigmas_hundredths
        .iter()
        .map(|s| s * s * d1 as f64 / 10_000.0)
        .collect()
}

impl ExperimentSpec {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let sweep_dims = Dims {
            d1: 500,
            d: 10,
            m: 50,
            tokens: 2,
        };
        let mut spec = ExperimentSpec {
            kind,
            grid: Grid {
                eps_min: steps(10, 10),
                nsr: nsr_levels(&[1.0, 3.0, 5.0], 500),
            },
            reps: 100,
            seed: 0,
            dims: sweep_dims,
            profile: ProfileSpec {
                minority_count: 1,
                base_rate: DEFAULT_BASE_RATE,
                magnitude: MagnitudeLaw::default(),
            },
            train: TrainConfig::default(),
            eval: EvalSpec::default(),
            prune_alphas: vec![0.05, 0.1],
            output_dir: PathBuf::from(format!("out/{}", kind.label())),
        };
        match kind {
            ExperimentKind::AlignmentSweep => {}
            ExperimentKind::CosineSweep => {
                spec.grid.eps_min = steps(10, 5);
                spec.grid.nsr = nsr_levels(&[5.0, 7.5, 10.0], 500);
            }
            ExperimentKind::MseSweep => {
                spec.grid.eps_min = steps(10, 5);
                spec.grid.nsr = nsr_levels(&[3.0, 5.0, 7.5], 500);
            }
            ExperimentKind::Heatmap => {
                spec.grid = Grid {
                    eps_min: vec![0.3],
                    nsr: nsr_levels(&[3.0], 500),
                };
                spec.reps = 1;
                spec.dims = Dims {
                    d1: 500,
                    d: 9,
                    m: 24,
                    tokens: 2,
                };
                spec.profile.minority_count = 4;
            }
            ExperimentKind::StageProbe => {
                spec.grid = Grid {
                    eps_min: vec![1.0],
                    nsr: nsr_levels(&[1.0], 500),
                };
                spec.reps = 1;
                spec.train.bias.enable_bias = true;
            }
            ExperimentKind::PruneAb => {
                spec.grid = Grid {
                    eps_min: vec![0.1],
                    nsr: nsr_levels(&[3.0], 500),
                };
                spec.reps = 20;
            }
        }
        spec
    }

    /// Parses a spec document, filling unspecified fields from the kind's
    /// defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::parse(text, None)
    }

    /// Like [`ExperimentSpec::from_json`] for a command that implies `kind`:
    /// the document may omit it but must not contradict it.
    pub fn from_json_as(text: &str, kind: ExperimentKind) -> Result<Self> {
        Self::parse(text, Some(kind))
    }

    fn parse(text: &str, implied: Option<ExperimentKind>) -> Result<Self> {
        let mut user: Value = serde_json::from_str(text).map_err(|e| Error::from_json(e, text))?;
        if !user.is_object() {
            return Err(config("", "spec must be a JSON object"));
        }
        let kind = match (user.get("kind").cloned(), implied) {
            (Some(v), implied) => {
                let kind: ExperimentKind =
                    serde_json::from_value(v).map_err(|e| config("kind", e.to_string()))?;
                if let Some(k) = implied.filter(|k| *k != kind) {
                    return Err(config(
                        "kind",
                        format!("this command runs {}, spec says {}", k.label(), kind.label()),
                    ));
                }
                kind
            }
            (None, Some(k)) => {
                user["kind"] = Value::String(k.label().into());
                k
            }
            (None, None) => return Err(config("kind", "missing experiment kind")),
        };
        let mut merged = serde_json::to_value(Self::defaults(kind)).expect("defaults serialize");
        merge(&mut merged, user);
        let spec: ExperimentSpec = serde_path_to_error::deserialize(merged).map_err(|e| {
            let field = e.path().to_string();
            config(&field, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, None)
    }

    pub fn load_as(path: &Path, kind: ExperimentKind) -> Result<Self> {
        Self::parse(&read(path)?, Some(kind))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.eps_min.is_empty() {
            return Err(config("grid.eps_min", "grid must be nonempty"));
        }
        if let Some(e) = self.grid.eps_min.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(config("grid.eps_min", format!("values must lie in (0, 1], got {e}")));
        }
        if self.grid.nsr.is_empty() {
            return Err(config("grid.nsr", "grid must be nonempty"));
        }
        if let Some(n) = self.grid.nsr.iter().find(|n| !(**n >= 0.0 && n.is_finite())) {
            return Err(config("grid.nsr", format!("values must be finite and >= 0, got {n}")));
        }
        if self.reps == 0 {
            return Err(config("reps", "need at least one repetition"));
        }
        let Dims { d1, d, m, tokens } = self.dims;
        if d1 == 0 || d == 0 || m == 0 || tokens == 0 {
            return Err(config("dims", "d1, d, m and tokens must be positive"));
        }
        if d > d1 {
            return Err(config("dims.d", format!("d = {d} exceeds d1 = {d1}")));
        }
        if self.profile.minority_count == 0 {
            return Err(config("profile.minority_count", "need at least one minority feature"));
        }
        if self.profile.minority_count > d {
            return Err(config(
                "profile.minority_count",
                format!("{} minority features but only d = {d}", self.profile.minority_count),
            ));
        }
        if !(self.profile.base_rate > 0.0 && self.profile.base_rate <= 1.0) {
            return Err(config("profile.base_rate", "must lie in (0, 1]"));
        }
        self.profile
            .magnitude
            .validate()
            .map_err(|e| config("profile.magnitude", e.to_string()))?;
        self.train.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config(&format!("train.{name}"), reason),
            other => config("train", other.to_string()),
        })?;
        let ev = &self.eval;
        if ev.test_pairs == 0 || ev.probe_train_pairs == 0 || ev.probe_test_pairs == 0 {
            return Err(config("eval", "pair counts must be positive"));
        }
        if !(ev.ridge >= 0.0 && ev.ridge.is_finite()) {
            return Err(config("eval.ridge", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&ev.align_threshold) {
            return Err(config("eval.align_threshold", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&ev.gamma) {
            return Err(config("eval.gamma", "must lie in [0, 1)"));
        }
        if matches!(self.kind, ExperimentKind::Heatmap | ExperimentKind::StageProbe) {
            let one = "trains a single model: exactly one value";
            if self.grid.eps_min.len() != 1 {
                return Err(config("grid.eps_min", one));
            }
            if self.grid.nsr.len() != 1 {
                return Err(config("grid.nsr", one));
            }
            if self.reps != 1 {
                return Err(config("reps", "trains a single model: reps must be 1"));
            }
        }
        if self.kind == ExperimentKind::PruneAb {
            if self.prune_alphas.is_empty() {
                return Err(config("prune_alphas", "need at least one pruning ratio"));
            }
            if let Some(a) = self.prune_alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                return Err(config("prune_alphas", format!("values must lie in (0, 1), got {a}")));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(config("output_dir", "must be nonempty"));
        }
        Ok(())
    }

    /// Seeds of the repetitions, in order.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.reps as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    pub fn feature_profile(&self, eps_min: f64) -> Result<FeatureProfile> {
        let p = FeatureProfile::imbalanced(self.dims.d, self.profile.minority_count, eps_min)?;
        FeatureProfile::with_magnitude(p.freqs().to_vec(), self.profile.base_rate, self.profile.magnitude)
    }

    pub fn noise(&self, nsr: f64) -> Result<NoiseSpec> {
        NoiseSpec::from_nsr(nsr, self.dims.d1)
    }

    /// Training configuration of one repetition.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn config(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Recursive object merge; anything but an object replaces the base value.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_takes_kind_defaults() {
        let spec = ExperimentSpec::from_json(r#"{"kind": "heatmap"}"#).unwrap();
        assert_eq!(spec, ExperimentSpec::defaults(ExperimentKind::Heatmap));
        assert_eq!((spec.dims.m, spec.dims.d, spec.profile.minority_count), (24, 9, 4));
    }

    #[test]
    fn default_grids() {
        let a = ExperimentSpec::defaults(ExperimentKind::AlignmentSweep);
        assert_eq!(a.grid.eps_min, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        assert_eq!(a.grid.nsr, vec![0.05, 0.45, 1.25]);
        assert_eq!(a.reps, 100);
        let c = ExperimentSpec::defaults(ExperimentKind::CosineSweep);
        assert_eq!(c.grid.eps_min[0], 0.05);
        assert_eq!(c.grid.eps_min[9], 0.5);
        assert_eq!(c.grid.nsr, vec![1.25, 2.8125, 5.0]);
        let m = ExperimentSpec::defaults(ExperimentKind::MseSweep);
        assert_eq!(m.grid.nsr, vec![0.45, 1.25, 2.8125]);
        assert_eq!((m.eval.probe_train_pairs, m.eval.probe_test_pairs), (1000, 5000));
    }

    #[test]
    fn nested_overrides_keep_sibling_defaults() {
        let spec = ExperimentSpec::from_json(
            r#"{"kind": "cosine_sweep", "train": {"eta": 0.1}, "dims": {"d1": 64, "d": 4, "m": 8, "tokens": 2}}"#,
        )
        .unwrap();
        assert_eq!(spec.train.eta, 0.1);
        assert_eq!(spec.train.lambda, TrainConfig::default().lambda);
        assert_eq!(spec.dims.d1, 64);
    }

    #[test]
    fn errors_name_the_field() {
        let field_of = |text: &str| match ExperimentSpec::from_json(text).unwrap_err() {
            Error::Config { field, .. } => field,
            other => panic!("unexpected {other}"),
        };
        assert_eq!(field_of(r#"{"kind": "mse_sweep", "reps": 0}"#), "reps");
        assert_eq!(field_of(r#"{"kind": "mse_sweep", "train": {"eta": -1.0}}"#), "train.eta");
        assert_eq!(field_of(r#"{"kind": "mse_sweep", "grid": {"eps_min": []}}"#), "grid.eps_min");
        assert_eq!(field_of(r#"{"kind": "mse_sweep", "dims": {"d1": "wide"}}"#), "dims.d1");
        assert_eq!(field_of(r#"{"kind": "nonsense"}"#), "kind");
        assert_eq!(field_of(r#"{"reps": 3}"#), "kind");
        match ExperimentSpec::from_json(r#"{"kind": "heatmap", "colour": 1}"#).unwrap_err() {
            Error::Config { reason, .. } => assert!(reason.contains("colour"), "{reason}"),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            ExperimentSpec::from_json("{\"kind\": ").unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentSpec::from_json(r#"{"kind": "heatmap", "eval": {"pairs": 3}}"#).unwrap_err();
        match err {
            Error::Config { field, reason } => {
                assert!(field.starts_with("eval"), "{field}");
                assert!(reason.contains("pairs"), "{reason}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn seeds_and_profiles() {
        let mut spec = ExperimentSpec::defaults(ExperimentKind::PruneAb);
        spec.seed = 7;
        spec.reps = 3;
        assert_eq!(spec.seeds(), vec![7, 8, 9]);
        let p = spec.feature_profile(0.1).unwrap();
        assert_eq!(p.freqs()[9], 0.1);
        assert!(p.freqs()[..9].iter().all(|e| *e == 1.0));
        assert_eq!(spec.train_config(8).seed, 8);
    }

    #[test]
    fn implied_kind() {
        let spec = ExperimentSpec::from_json_as("{}", ExperimentKind::PruneAb).unwrap();
        assert_eq!(spec.kind, ExperimentKind::PruneAb);
        assert!(ExperimentSpec::from_json_as(r#"{"kind": "heatmap"}"#, ExperimentKind::PruneAb).is_err());
        assert!(ExperimentSpec::from_json("[1]").is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = ExperimentSpec::defaults(ExperimentKind::StageProbe);
        assert_eq!(ExperimentSpec::from_json(&spec.to_json()).unwrap(), spec);
    }
}
