//! Matched-seed A/B comparison of pruned and unpruned training.
//!
//! Both arms of a seed share the dictionary, the initial weights and every
//! training batch; they differ only in the forward mask.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{prepare_dir, write_csv, write_metadata, ExperimentOutput};
use super::spec::{ExperimentKind, ExperimentSpec};
use super::sweep::{cells, pool, Cell};
use crate::analytics::{alignment_matrix, classify_neurons, feature_energy};
use crate::data::FeatureProfile;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::stats::{mean, sign_test_p};
use crate::trainer::Trainer;

/// Minority-feature metrics of one arm after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorityMetrics {
    pub epoch: usize,
    pub max_abs_cos: f64,
    pub count_ge_threshold: usize,
    pub feature_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmTrace {
    pub alpha: f64,
    pub epochs: Vec<MinorityMetrics>,
}

impl ArmTrace {
    pub fn final_max_abs_cos(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.max_abs_cos)
    }
}

/// One seed: the unpruned arm and one arm per pruning ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedComparison {
    pub cell: Cell,
    pub unpruned: ArmTrace,
    pub pruned: Vec<ArmTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignTest {
    pub eps_min: f64,
    pub nsr: f64,
    pub alpha: f64,
    /// Seeds where the pruned arm ends strictly higher.
    pub wins: usize,
    pub trials: usize,
    pub mean_difference: f64,
    pub sign_test_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneAbOutcome {
    pub comparisons: Vec<SeedComparison>,
    pub tests: Vec<SignTest>,
}

fn minority_metrics(
    epoch: usize,
    trainer: &Trainer<'_>,
    dict: &Dictionary,
    profile: &FeatureProfile,
    spec: &ExperimentSpec,
) -> Result<MinorityMetrics> {
    let j = spec.dims.d - 1;
    let w = &trainer.state().weights;
    let a = alignment_matrix(w, dict, spec.eval.align_threshold)?;
    let tax = classify_neurons(w, dict, profile, spec.eval.gamma)?;
    Ok(MinorityMetrics {
        epoch,
        max_abs_cos: a.per_feature_max[j],
        count_ge_threshold: a.counts_ge[j],
        feature_energy: feature_energy(&tax, w, dict).values[j],
    })
}

/// Trains one arm with pruning ratio `alpha`, recording metrics each epoch.
pub fn run_arm(spec: &ExperimentSpec, cell: Cell, alpha: f64) -> Result<ArmTrace> {
    let dict = Dictionary::build(spec.dims.d1, spec.dims.d, cell.seed)?;
    let profile = spec.feature_profile(cell.eps_min)?;
    let mut cfg = spec.train_config(cell.seed);
    cfg.alpha = alpha;
    let mut trainer = Trainer::new(&dict, &profile, spec.noise(cell.nsr)?, spec.dims.model(), cfg)?;
    let mut epochs = Vec::with_capacity(spec.train.epochs);
    while !trainer.is_done() {
        let record = trainer.run_epoch()?;
        epochs.push(minority_metrics(record.epoch, &trainer, &dict, &profile, spec)?);
    }
    Ok(ArmTrace { alpha, epochs })
}

fn sign_tests(spec: &ExperimentSpec, comparisons: &[SeedComparison]) -> Vec<SignTest> {
    let mut out = Vec::new();
    for group in comparisons.chunk_by(|a, b| a.cell.eps_min == b.cell.eps_min && a.cell.nsr == b.cell.nsr) {
        for (k, &alpha) in spec.prune_alphas.iter().enumerate() {
            let diffs: Vec<f64> = group
                .iter()
                .map(|c| c.pruned[k].final_max_abs_cos() - c.unpruned.final_max_abs_cos())
                .collect();
            let wins = diffs.iter().filter(|d| **d > 0.0).count();
            out.push(SignTest {
                eps_min: group[0].cell.eps_min,
                nsr: group[0].cell.nsr,
                alpha,
                wins,
                trials: diffs.len(),
                mean_difference: mean(&diffs),
                sign_test_p: sign_test_p(wins, diffs.len()),
            });
        }
    }
    out
}

/// Runs every seed of every grid cell; arms are trained in parallel.
pub fn run_prune_ab(spec: &ExperimentSpec, jobs: usize) -> Result<PruneAbOutcome> {
    if spec.kind != ExperimentKind::PruneAb {
        return Err(Error::Config {
            field: "kind".into(),
            reason: format!("expected prune_ab, got {}", spec.kind.label()),
        });
    }
    spec.validate()?;
    let cells = cells(spec);
    let alphas: Vec<f64> = std::iter::once(0.0).chain(spec.prune_alphas.iter().copied()).collect();
    let units: Vec<(Cell, f64)> = cells
        .iter()
        .flat_map(|&c| alphas.iter().map(move |&a| (c, a)))
        .collect();
    let traces: Vec<ArmTrace> = pool(jobs)?.install(|| {
        units
            .par_iter()
            .map(|&(c, a)| run_arm(spec, c, a))
            .collect::<Result<_>>()
    })?;
    let comparisons: Vec<SeedComparison> = cells
        .iter()
        .zip(traces.chunks(alphas.len()))
        .map(|(&cell, arms)| SeedComparison {
            cell,
            unpruned: arms[0].clone(),
            pruned: arms[1..].to_vec(),
        })
        .collect();
    let tests = sign_tests(spec, &comparisons);
    Ok(PruneAbOutcome { comparisons, tests })
}

#[derive(Serialize)]
struct TraceRow<'a> {
    seed: u64,
    eps_min: f64,
    nsr: f64,
    arm: &'a str,
    alpha: f64,
    epoch: usize,
    max_abs_cos: f64,
    count_ge_threshold: usize,
    feature_energy: f64,
}

#[derive(Serialize)]
struct FinalRow {
    seed: u64,
    eps_min: f64,
    nsr: f64,
    alpha: f64,
    unpruned_max_abs_cos: f64,
    pruned_max_abs_cos: f64,
    difference: f64,
}

/// Runs the comparison and writes `prune_ab.csv` (per-epoch traces),
/// `prune_ab_final.csv` (paired finals) and `prune_ab_summary.csv`.
pub fn prune_ab_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutput> {
    let outcome = run_prune_ab(spec, jobs)?;
    let dir = spec.output_dir.clone();
    prepare_dir(&dir)?;
    let mut trace_rows = Vec::new();
    let mut final_rows = Vec::new();
    for c in &outcome.comparisons {
        let arms = std::iter::once(("unpruned", &c.unpruned)).chain(c.pruned.iter().map(|a| ("pruned", a)));
        for (arm, trace) in arms {
            trace_rows.extend(trace.epochs.iter().map(|m| TraceRow {
                seed: c.cell.seed,
                eps_min: c.cell.eps_min,
                nsr: c.cell.nsr,
                arm,
                alpha: trace.alpha,
                epoch: m.epoch,
                max_abs_cos: m.max_abs_cos,
                count_ge_threshold: m.count_ge_threshold,
                feature_energy: m.feature_energy,
            }));
        }
        for p in &c.pruned {
            let (u, v) = (c.unpruned.final_max_abs_cos(), p.final_max_abs_cos());
            final_rows.push(FinalRow {
                seed: c.cell.seed,
                eps_min: c.cell.eps_min,
                nsr: c.cell.nsr,
                alpha: p.alpha,
                unpruned_max_abs_cos: u,
                pruned_max_abs_cos: v,
                difference: v - u,
            });
        }
    }
    let mut files = vec![
        dir.join("prune_ab.csv"),
        dir.join("prune_ab_final.csv"),
        dir.join("prune_ab_summary.csv"),
    ];
    write_csv(
        &files[0],
        &[
            "seed",
            "eps_min",
            "nsr",
            "arm",
            "alpha",
            "epoch",
            "max_abs_cos",
            "count_ge_threshold",
            "feature_energy",
        ],
        &trace_rows,
    )?;
    write_csv(
        &files[1],
        &[
            "seed",
            "eps_min",
            "nsr",
            "alpha",
            "unpruned_max_abs_cos",
            "pruned_max_abs_cos",
            "difference",
        ],
        &final_rows,
    )?;
    write_csv(
        &files[2],
        &["eps_min", "nsr", "alpha", "wins", "trials", "mean_difference", "sign_test_p"],
        &outcome.tests,
    )?;
    let summary = json!({ "sign_tests": outcome.tests });
    write_metadata(spec, &mut files, &summary)?;
    Ok(ExperimentOutput { dir, files, summary })
}
