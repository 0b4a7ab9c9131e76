//! Magnitude masks and the decay of masked neurons.

use contrastive_lab::encoder::EncoderState;
use contrastive_lab::pruning::{magnitude_mask, pruned_count};
use contrastive_lab::rng::{stream, Stream};
use ndarray::arr2;

fn main() -> contrastive_lab::Result<()> {
    let w = arr2(&[[3.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.0, 2.0]]);
    for alpha in [0.0, 0.2, 0.4, 0.6] {
        let mask = magnitude_mask(&w, alpha)?;
        println!(
            "alpha {alpha}: prune floor({alpha} * 5) = {} neurons -> pruned_indices \"{}\"",
            pruned_count(5, alpha),
            mask.log_field()
        );
    }

    // Over training, masks follow the norms; pruned neurons keep decaying.
    let mut state = EncoderState::init(10, 20, 1.0, &mut stream(5, Stream::Init))?;
    let (eta, lambda) = (0.1, 0.5);
    for step in 0..4 {
        let mask = magnitude_mask(&state.weights, 0.3)?;
        state.weights.mapv_inplace(|v| v * (1.0 - eta * lambda));
        let norms: Vec<String> = state.neuron_norms().iter().map(|n| format!("{n:.2}")).collect();
        println!("step {step}: pruned {:?}  norms {}", mask.pruned_indices(), norms.join(" "));
    }
    Ok(())
}
