//! Experiment specifications, sweeps, CSV output and checkpoints.
//!
//! [`run_experiment`] dispatches on the spec kind and writes every output
//! file under `spec.output_dir`, together with `spec.json` (the resolved
//! spec) and `metadata.json` (resolved defaults, modelling deviations and a
//! kind-specific summary).

pub mod checkpoint;
pub mod output;
pub mod prune_ab;
pub mod single;
pub mod spec;
pub mod sweep;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use output::ExperimentOutput;
pub use spec::{ExperimentKind, ExperimentSpec};

use crate::error::Result;

/// Runs any experiment kind on `jobs` worker threads.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutput> {
    match spec.kind {
        ExperimentKind::AlignmentSweep | ExperimentKind::CosineSweep | ExperimentKind::MseSweep => {
            sweep::sweep_experiment(spec, jobs)
        }
        ExperimentKind::Heatmap | ExperimentKind::StageProbe => {
            sweep::pool(jobs)?;
            single::single_experiment(spec)
        }
        ExperimentKind::PruneAb => prune_ab::prune_ab_experiment(spec, jobs),
    }
}
