//! Trains the 24-neuron, 9-feature model and prints its squared-cosine
//! heatmap with the single-feature and mixed neurons marked.

use contrastive_lab::harness::single::{run_single, STRONG_SQ_COS, WEAK_SQ_COS};
use contrastive_lab::harness::spec::{ExperimentKind, ExperimentSpec};

fn main() -> contrastive_lab::Result<()> {
    let mut spec = ExperimentSpec::defaults(ExperimentKind::Heatmap);
    if let Some(e) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        spec.train.epochs = e;
    }
    let run = run_single(&spec)?;
    println!("features 0-4 at eps 1, 5-8 at eps {}; init mean sq_cos {:.5}", spec.grid.eps_min[0], run.init_mean_sq_cos());
    print!("neuron");
    for j in 0..spec.dims.d {
        print!("  f{j}   ");
    }
    println!();
    for (i, row) in run.trained.sq_cos.rows().into_iter().enumerate() {
        print!("{i:>6}");
        for v in row {
            print!(" {v:.3} ");
        }
        let tag = if run.patterns.mixed.contains(&i) { " mixed" } else { "" };
        println!("{tag}");
    }
    println!(
        "single-feature neurons (>= {STRONG_SQ_COS} on one feature, < {WEAK_SQ_COS} elsewhere): {:?}",
        run.patterns.single_feature
    );
    Ok(())
}
