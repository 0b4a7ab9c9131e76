//! Draws latent signals, positive pairs and a contrastive batch.

use contrastive_lab::data::{is_positive_pair, make_batch, make_positive_pair, sample_latent, FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::rng::{stream, Stream};

fn main() -> contrastive_lab::Result<()> {
    let (d1, d, tokens) = (64, 6, 2);
    let dict = Dictionary::build(d1, d, 1)?;
    // Five common features and one rare one.
    let profile = FeatureProfile::imbalanced(d, 1, 0.1)?;
    let noise = NoiseSpec::from_nsr(0.2, d1)?;
    let mut rng = stream(1, Stream::Train);

    println!("activation probabilities:");
    for j in 0..d {
        println!("  feature {j}: eps {:.2}  p {:.3}", profile.freqs()[j], profile.activation_prob(j));
    }

    let mut hits = vec![0usize; d];
    let n = 20_000;
    for _ in 0..n {
        for &j in &sample_latent(&profile, tokens, &mut rng)?.support {
            hits[j] += 1;
        }
    }
    let rates: Vec<String> = hits.iter().map(|h| format!("{:.3}", *h as f64 / n as f64)).collect();
    println!("empirical activation rates over {n} draws: {}", rates.join(" "));

    // Redraw until the anchor has some active feature.
    let (x, y) = loop {
        let pair = make_positive_pair(&dict, &profile, tokens, noise, &mut rng)?;
        if !pair.0.latent.support.is_empty() {
            break pair;
        }
    };
    println!("\npositive pair: support {:?}, signs {:?}", x.latent.support, x.latent.signs);
    println!("anchor magnitudes   {:.3}", x.latent.magnitudes);
    println!("positive magnitudes {:.3}", y.latent.magnitudes);
    println!("shares support and signs: {}", is_positive_pair(&x.latent, &y.latent, d));

    let batch = make_batch(&dict, &profile, tokens, noise, 4, 3, &mut rng)?;
    println!("\nbatch of {} entries, {} negatives each", batch.len(), batch.entries[0].negatives.len());
    for (k, e) in batch.entries.iter().enumerate() {
        let negs: Vec<_> = e.negatives.iter().map(|s| s.latent.support.clone()).collect();
        println!("  entry {k}: anchor {:?}, negatives {negs:?}", e.anchor.latent.support);
    }
    Ok(())
}
