//! Positive-pair cosine and the linear probe on a trained encoder.

use contrastive_lab::data::{FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::evaluation::{fit_probe, mean_pair_cosine, probe_dataset, probe_test_mse, PROBE_TARGET};
use contrastive_lab::rng::{stream, Stream};
use contrastive_lab::trainer::{train, ModelDims, TrainConfig};

fn main() -> contrastive_lab::Result<()> {
    let (d1, d, tokens) = (200, 10, 2);
    let dict = Dictionary::build(d1, d, 2)?;
    println!("eps_min  nsr   mean_cosine  test_mse ({PROBE_TARGET})");
    for nsr in [0.2, 1.0] {
        for eps in [0.05, 0.25, 0.5] {
            let profile = FeatureProfile::imbalanced(d, 1, eps)?;
            let noise = NoiseSpec::from_nsr(nsr, d1)?;
            let cfg = TrainConfig {
                epochs: 200,
                seed: 2,
                ..TrainConfig::default()
            };
            let state = train(&dict, &profile, noise, ModelDims { m: 50, tokens }, &cfg)?.state;
            let cos = mean_pair_cosine(&state, &dict, &profile, tokens, 2000, noise, &mut stream(2, Stream::Eval))?;
            let (xa, ya) = probe_dataset(&state, &dict, &profile, tokens, 1000, noise, &mut stream(2, Stream::ProbeTrain))?;
            let (xb, yb) = probe_dataset(&state, &dict, &profile, tokens, 2000, noise, &mut stream(2, Stream::ProbeTest))?;
            let probe = fit_probe(&xa, &ya, 1e-6)?;
            println!(
                "{eps:<7}  {nsr:<4}  {:.4}       {:.5}",
                cos.mean_cosine,
                probe_test_mse(&probe, &xb, &yb)?
            );
        }
    }
    Ok(())
}
