//! Saves a run mid-training, resumes it and checks it matches an
//! uninterrupted run.

use contrastive_lab::data::{FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::harness::Checkpoint;
use contrastive_lab::trainer::{ModelDims, TrainConfig, Trainer};

fn main() -> contrastive_lab::Result<()> {
    let d1 = 60;
    let dict = Dictionary::build(d1, 6, 4)?;
    let profile = FeatureProfile::imbalanced(6, 1, 0.2)?;
    let noise = NoiseSpec::from_nsr(0.2, d1)?;
    let dims = ModelDims { m: 12, tokens: 2 };
    let cfg = TrainConfig {
        epochs: 40,
        alpha: 0.1,
        seed: 4,
        ..TrainConfig::default()
    };

    let mut reference = Trainer::new(&dict, &profile, noise, dims, cfg.clone())?;
    while !reference.is_done() {
        reference.run_epoch()?;
    }

    let mut first = Trainer::new(&dict, &profile, noise, dims, cfg)?;
    for _ in 0..15 {
        first.run_epoch()?;
    }
    let path = std::env::temp_dir().join("lab-checkpoint-example.json");
    Checkpoint::capture(&first).save(&path)?;
    println!("saved epoch {} to {} ({} bytes)", first.epoch(), path.display(), std::fs::metadata(&path).unwrap().len());

    let loaded = Checkpoint::load(&path)?;
    let mut resumed = loaded.resume()?;
    while !resumed.is_done() {
        resumed.run_epoch()?;
    }
    println!("resumed run matches uninterrupted run: {}", resumed.state() == reference.state());

    let text = std::fs::read_to_string(&path).unwrap();
    match Checkpoint::from_json(&text[..text.len() / 3]) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => println!("truncated file unexpectedly parsed"),
    }
    match Checkpoint::from_json(&text.replacen("\"v1\"", "\"v0\"", 1)) {
        Err(e) => println!("old tag: {e}"),
        Ok(_) => println!("old tag unexpectedly accepted"),
    }
    Ok(())
}
