//! Matched-seed comparison of pruned and unpruned training on a rare feature.
//!
//! `cargo run --release --example prune_ab -- [seeds]`

use contrastive_lab::harness::prune_ab::run_prune_ab;
use contrastive_lab::harness::spec::{Dims, ExperimentKind, ExperimentSpec};

fn main() -> contrastive_lab::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let mut spec = ExperimentSpec::defaults(ExperimentKind::PruneAb);
    spec.dims = Dims {
        d1: 200,
        d: 10,
        m: 50,
        tokens: 2,
    };
    spec.grid.nsr = vec![0.2];
    spec.reps = seeds;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = run_prune_ab(&spec, jobs)?;
    println!("seed  unpruned  alpha=0.05  alpha=0.1   (final max |cos| to the rare feature)");
    for c in &out.comparisons {
        let arms: Vec<String> = c.pruned.iter().map(|a| format!("{:.4}", a.final_max_abs_cos())).collect();
        println!("{:>4}  {:.4}    {}", c.cell.seed, c.unpruned.final_max_abs_cos(), arms.join("      "));
    }
    for t in &out.tests {
        println!(
            "alpha {}: pruned ahead {}/{}; mean difference {:+.4}; one-sided sign test p = {:.4}",
            t.alpha, t.wins, t.trials, t.mean_difference, t.sign_test_p
        );
    }
    Ok(())
}
