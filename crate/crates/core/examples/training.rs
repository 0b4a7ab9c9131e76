//! Trains a desk-scale model and prints the training log and stage markers.
//!
//! `cargo run --release --example training -- [epochs] [alpha]`

use contrastive_lab::analytics::alignment_matrix;
use contrastive_lab::data::{FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::trainer::{train, ModelDims, TrainConfig};

fn main() -> contrastive_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let alpha = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);
    let (d1, d) = (200, 10);
    let dict = Dictionary::build(d1, d, 0)?;
    let profile = FeatureProfile::imbalanced(d, 1, 0.3)?;
    let cfg = TrainConfig {
        epochs,
        alpha,
        ..TrainConfig::default()
    };
    let out = train(&dict, &profile, NoiseSpec::from_nsr(0.2, d1)?, ModelDims { m: 50, tokens: 2 }, &cfg)?;

    println!("epoch  infonce   mean_l'_p  min|w|   max|w|   pruned");
    for r in out.log.iter().filter(|r| r.epoch % (epochs / 10).max(1) == 0 || r.epoch + 1 == epochs) {
        let pruned = r.pruned_indices.split(';').filter(|s| !s.is_empty()).count();
        println!(
            "{:>5}  {:.4}    {:.4}     {:.4}   {:.4}   {pruned}",
            r.epoch, r.loss_infonce, r.mean_pos_logit, r.min_neuron_norm, r.max_neuron_norm
        );
    }
    println!("stage markers: t1 {:?}, t2 {:?}", out.stages.t1_hit_epoch, out.stages.t2_hit_epoch);

    let report = alignment_matrix(&out.state.weights, &dict, 0.3)?;
    println!("per-feature max |cos|: {:.3?}", report.per_feature_max);
    println!("neurons with |cos| >= 0.3: {:?}", report.counts_ge);
    Ok(())
}
