//! Embeds one sample and prints the attention weights and neuron trace.

use contrastive_lab::data::{draw_sample, FeatureProfile, NoiseSpec};
use contrastive_lab::dictionary::Dictionary;
use contrastive_lab::encoder::EncoderState;
use contrastive_lab::rng::{stream, Stream};

fn main() -> contrastive_lab::Result<()> {
    let (d1, d, m, tokens) = (32, 4, 6, 3);
    let dict = Dictionary::build(d1, d, 3)?;
    let profile = FeatureProfile::balanced(d)?;
    let mut state = EncoderState::init(m, d1, 0.3, &mut stream(3, Stream::Init))?;
    state.biases.fill(0.05);

    let x = draw_sample(&dict, &profile, tokens, NoiseSpec::from_nsr(0.1, d1)?, &mut stream(3, Stream::Eval))?;
    let trace = state.forward(x.tokens.view())?;
    println!("attention weights (row r attends over tokens):\n{:.3}", trace.mix.weights);
    println!("preactivations (neuron x token):\n{:.3}", trace.preacts);
    println!("outside the dead zone:\n{}", trace.active.mapv(|a| a as u8));
    println!("embedding h: {:.4}", trace.h);
    println!("grad of h_0 wrt w_0 has norm {:.4}", trace.neuron_grad(0).dot(&trace.neuron_grad(0)).sqrt());

    state.mask[0] = false;
    let masked = state.forward(x.tokens.view())?;
    println!("with neuron 0 masked, f: {:.4}", masked.f);
    println!("grad of h_0 wrt w_0 now has norm {:.4}", masked.neuron_grad(0).dot(&masked.neuron_grad(0)).sqrt());
    Ok(())
}
