//! Versioned JSON checkpoints of a training run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{FeatureProfile, NoiseSpec};
use crate::dictionary::Dictionary;
use crate::encoder::EncoderState;
use crate::error::{Error, Result};
use crate::rng::RngCursor;
use crate::trainer::{ModelDims, StageReport, TrainConfig, Trainer};

pub const CHECKPOINT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub dictionary: Dictionary,
    pub state: EncoderState,
    pub config: TrainConfig,
    pub profile: FeatureProfile,
    pub noise: NoiseSpec,
    pub dims: ModelDims,
    /// Completed epochs.
    pub epoch: usize,
    pub rng: RngCursor,
    /// Stage detections so far, without the per-epoch history.
    pub stages: StageReport,
}

impl Checkpoint {
    pub fn capture(trainer: &Trainer<'_>) -> Self {
        let mut stages = trainer.stages().clone();
        stages.per_epoch.clear();
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            dictionary: trainer.dictionary().clone(),
            state: trainer.state().clone(),
            config: trainer.config().clone(),
            profile: trainer.profile().clone(),
            noise: trainer.noise(),
            dims: trainer.dims(),
            epoch: trainer.epoch(),
            rng: trainer.rng_cursor(),
            stages,
        }
    }

    /// A trainer continuing exactly where the captured one stopped.
    pub fn resume(&self) -> Result<Trainer<'_>> {
        let mut trainer = Trainer::resume(
            &self.dictionary,
            &self.profile,
            self.noise,
            self.dims,
            self.config.clone(),
            self.state.clone(),
            self.epoch,
            Some(&self.rng),
        )?;
        trainer.restore_stages(self.stages.clone());
        Ok(trainer)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: Value = serde_json::from_str(text).map_err(|e| Error::from_json(e, text))?;
        let found = probe.get("version").and_then(Value::as_str).unwrap_or("<missing>");
        if found != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION.to_string(),
                found: found.to_string(),
            });
        }
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| Error::from_json(e, text))?;
        ckpt.dictionary.validate()?;
        ckpt.state.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Dictionary, FeatureProfile) {
        (
            Dictionary::build(16, 3, 5).unwrap(),
            FeatureProfile::imbalanced(3, 1, 0.5).unwrap(),
        )
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 6,
            batch_entries: 3,
            negatives: 2,
            alpha: 0.25,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let (dict, profile) = fixture();
        let noise = NoiseSpec::from_nsr(0.1, 16).unwrap();
        let dims = ModelDims { m: 4, tokens: 2 };
        let mut full = Trainer::new(&dict, &profile, noise, dims, cfg()).unwrap();
        let mut half = Trainer::new(&dict, &profile, noise, dims, cfg()).unwrap();
        for _ in 0..3 {
            full.run_epoch().unwrap();
            half.run_epoch().unwrap();
        }
        let text = Checkpoint::capture(&half).to_json();
        let restored = Checkpoint::from_json(&text).unwrap();
        let mut resumed = restored.resume().unwrap();
        for _ in 0..3 {
            assert_eq!(full.run_epoch().unwrap(), resumed.run_epoch().unwrap());
        }
        assert_eq!(full.state(), resumed.state());
    }

    #[test]
    fn version_and_syntax_errors() {
        let (dict, profile) = fixture();
        let noise = NoiseSpec::from_nsr(0.1, 16).unwrap();
        let t = Trainer::new(&dict, &profile, noise, ModelDims { m: 4, tokens: 2 }, cfg()).unwrap();
        let text = Checkpoint::capture(&t).to_json();
        let v0 = text.replacen("\"version\": \"v1\"", "\"version\": \"v0\"", 1);
        assert!(matches!(
            Checkpoint::from_json(&v0),
            Err(Error::VersionMismatch { found, .. }) if found == "v0"
        ));
        let cut = &text[..text.len() / 2];
        match Checkpoint::from_json(cut) {
            Err(Error::Parse { offset, .. }) => assert!(offset <= cut.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
