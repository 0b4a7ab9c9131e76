//! Alignment matrix, neuron taxonomy and feature energies before and after
//! training.

use contrastive_lab::analytics::{alignment_matrix, classify_neurons, feature_energy, initialization_statistics};
use contrastive_lab::data::{FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::encoder::EncoderState;
use contrastive_lab::rng::{stream, Stream};
use contrastive_lab::trainer::{train, ModelDims, TrainConfig};

fn main() -> contrastive_lab::Result<()> {
    let (d1, d, m) = (400, 20, 2000);
    let sigma0 = 0.05;
    let dict = Dictionary::build(d1, d, 5)?;
    let profile = FeatureProfile::balanced(d)?;
    let init = EncoderState::init(m, d1, sigma0, &mut stream(5, Stream::Init))?;
    let s = initialization_statistics(&init.weights, &dict, &profile, 0.1)?;
    let (e_norm, e_mass) = s.relative_errors(sigma0, d1, d);
    println!("initialization, m = {m}:");
    println!("  mean ||w||^2 {:.4} vs sigma0^2 d1 = {:.4} ({:.2}% off)", s.mean_norm_sq, sigma0 * sigma0 * d1 as f64, e_norm * 100.0);
    println!("  mean ||MM^T w||^2 {:.4} vs sigma0^2 d = {:.4} ({:.2}% off)", s.mean_feature_mass, sigma0 * sigma0 * d as f64, e_mass * 100.0);
    println!("  lucky per feature    {:?}", s.lucky_counts);
    println!("  ordinary per feature {:?}", s.ordinary_counts);
    println!("  |N_i| histogram      {:?}", &s.dominant_histogram[..6]);

    let (d1, d) = (200, 10);
    let dict = Dictionary::build(d1, d, 1)?;
    let profile = FeatureProfile::imbalanced(d, 1, 0.5)?;
    let cfg = TrainConfig {
        epochs: 300,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&dict, &profile, NoiseSpec::from_nsr(0.2, d1)?, ModelDims { m: 50, tokens: 2 }, &cfg)?;
    let w = &out.state.weights;
    let report = alignment_matrix(w, &dict, 0.3)?;
    let tax = classify_neurons(w, &dict, &profile, 0.1)?;
    let energy = feature_energy(&tax, w, &dict);
    println!("\nafter 300 epochs (feature 9 is the rare one):");
    println!("  c1 {:.3}, c2 {:.4}", tax.c1, tax.c2);
    for j in 0..d {
        println!(
            "  feature {j}: max |cos| {:.3}, |cos| >= 0.3: {:>2}, ordinary {:>2}, lucky {:>2}, energy {:.4}",
            report.per_feature_max[j],
            report.counts_ge[j],
            tax.ordinary[j].len(),
            tax.lucky[j].len(),
            energy.values[j]
        );
    }
    Ok(())
}
