//! Logits, InfoNCE and the stop-gradient batch gradient on a small batch.

use contrastive_lab::contrastive::{batch_gradient, infonce_loss, logits, LossReport};
use contrastive_lab::data::{make_batch, FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::encoder::EncoderState;
use contrastive_lab::rng::{stream, Stream};

fn main() -> contrastive_lab::Result<()> {
    for tau in [0.05, 1.0, 20.0] {
        let set = logits(2.0, &[1.0, 0.5, -1.0], tau)?;
        println!(
            "tau {tau:>5}: l'_p {:.4}  l'_s {:.4?}  sum {:.15}  loss {:.4}",
            set.pos,
            set.negs,
            set.total(),
            infonce_loss(&set)
        );
    }

    let (d1, d, m) = (48, 5, 8);
    let dict = Dictionary::build(d1, d, 9)?;
    let profile = FeatureProfile::imbalanced(d, 1, 0.2)?;
    let noise = NoiseSpec::from_nsr(0.2, d1)?;
    let state = EncoderState::init(m, d1, 0.2, &mut stream(9, Stream::Init))?;
    let batch = make_batch(&dict, &profile, 2, noise, 16, 15, &mut stream(9, Stream::Train))?;

    let grad = batch_gradient(&state, &batch, 1.0, true)?;
    let loss = LossReport::new(grad.infonce, &state, 1e-4);
    println!("\nbatch InfoNCE {:.4} (chance level ln 16 = {:.4})", loss.infonce, 16f64.ln());
    println!("regularizer {:.2e}, total {:.4}", loss.reg, loss.total);
    println!("mean positive probability {:.4}", grad.mean_pos_logit);
    for (i, row) in grad.weights.rows().into_iter().enumerate() {
        let feat = dict.features().dot(&row);
        println!(
            "neuron {i}: ||g|| {:.4}, feature-span share {:.3}",
            row.dot(&row).sqrt(),
            feat.dot(&feat) / row.dot(&row)
        );
    }
    Ok(())
}
