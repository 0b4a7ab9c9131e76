//! Grid sweeps over `(eps_min, nsr, seed)` cells.
//!
//! Each cell owns its whole pipeline (dictionary, trainer, evaluator) and
//! all its randomness derives from the cell seed, so cells run in any order
//! on any number of threads and the collected results are always ordered by
//! `(eps_min, nsr, seed)`.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{prepare_dir, write_csv, write_metadata, ExperimentOutput};
use super::spec::{ExperimentKind, ExperimentSpec};
use crate::analytics::{alignment_matrix, AlignmentReport};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::evaluation::{fit_probe, mean_pair_cosine, probe_dataset, probe_test_mse, CosineReport};
use crate::rng::{self, Stream};
use crate::stats;
use crate::trainer::train;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub eps_min: f64,
    pub nsr: f64,
    pub seed: u64,
}

/// Which metrics a sweep computes on each trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    pub alignment: bool,
    pub cosine: bool,
    pub mse: bool,
}

impl Metrics {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        Metrics {
            alignment: kind == ExperimentKind::AlignmentSweep,
            cosine: kind == ExperimentKind::CosineSweep,
            mse: kind == ExperimentKind::MseSweep,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub alignment: Option<AlignmentReport>,
    pub cosine: Option<CosineReport>,
    pub test_mse: Option<f64>,
    pub final_loss: f64,
}

/// All cells in output order.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut eps = spec.grid.eps_min.clone();
    let mut nsr = spec.grid.nsr.clone();
    eps.sort_by(f64::total_cmp);
    nsr.sort_by(f64::total_cmp);
    let seeds = spec.seeds();
    let mut out = Vec::with_capacity(eps.len() * nsr.len() * seeds.len());
    for &e in &eps {
        for &n in &nsr {
            out.extend(seeds.iter().map(|&seed| Cell {
                eps_min: e,
                nsr: n,
                seed,
            }));
        }
    }
    out
}

/// Trains one cell's model and scores it.
pub fn run_cell(spec: &ExperimentSpec, cell: Cell, metrics: Metrics) -> Result<CellResult> {
    let dict = Dictionary::build(spec.dims.d1, spec.dims.d, cell.seed)?;
    let profile = spec.feature_profile(cell.eps_min)?;
    let noise = spec.noise(cell.nsr)?;
    let out = train(&dict, &profile, noise, spec.dims.model(), &spec.train_config(cell.seed))?;
    let state = &out.state;
    let tokens = spec.dims.tokens;

    let alignment = metrics
        .alignment
        .then(|| alignment_matrix(&state.weights, &dict, spec.eval.align_threshold))
        .transpose()?;
    let cosine = metrics
        .cosine
        .then(|| {
            let mut rng = rng::stream(cell.seed, Stream::Eval);
            mean_pair_cosine(state, &dict, &profile, tokens, spec.eval.test_pairs, noise, &mut rng)
        })
        .transpose()?;
    let test_mse = metrics
        .mse
        .then(|| -> Result<f64> {
            let mut train_rng = rng::stream(cell.seed, Stream::ProbeTrain);
            let mut test_rng = rng::stream(cell.seed, Stream::ProbeTest);
            let (xa, ya) =
                probe_dataset(state, &dict, &profile, tokens, spec.eval.probe_train_pairs, noise, &mut train_rng)?;
            let (xb, yb) =
                probe_dataset(state, &dict, &profile, tokens, spec.eval.probe_test_pairs, noise, &mut test_rng)?;
            let model = fit_probe(&xa, &ya, spec.eval.ridge)?;
            probe_test_mse(&model, &xb, &yb)
        })
        .transpose()?;
    Ok(CellResult {
        cell,
        alignment,
        cosine,
        test_mse,
        final_loss: out.log.last().map_or(f64::NAN, |r| r.loss_infonce),
    })
}

pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::Config {
            field: "jobs".into(),
            reason: "need at least one worker".into(),
        });
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config {
            field: "jobs".into(),
            reason: e.to_string(),
        })
}

/// Runs every cell on `jobs` workers; results come back in cell order.
pub fn run_sweep(spec: &ExperimentSpec, metrics: Metrics, jobs: usize) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let cells = cells(spec);
    pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|&c| {
                let r = run_cell(spec, c, metrics);
                log::info!("cell eps_min={} nsr={} seed={} done", c.eps_min, c.nsr, c.seed);
                r
            })
            .collect()
    })
}

/// Indices of the trailing minority features.
pub fn minority_features(spec: &ExperimentSpec) -> std::ops::Range<usize> {
    spec.dims.d - spec.profile.minority_count..spec.dims.d
}

#[derive(Serialize)]
struct AlignmentRow {
    seed: u64,
    eps_min: f64,
    nsr: f64,
    feature_index: usize,
    count_ge_threshold: usize,
    max_abs_cos: f64,
}

#[derive(Serialize)]
struct CosineRow {
    seed: u64,
    eps_min: f64,
    nsr: f64,
    mean_cosine: f64,
    degenerate_pairs: usize,
}

#[derive(Serialize)]
struct MseRow {
    seed: u64,
    eps_min: f64,
    nsr: f64,
    test_mse: f64,
}

/// Per `(eps_min, nsr)` means of a scalar cell metric.
fn grid_means(results: &[CellResult], metric: impl Fn(&CellResult) -> f64) -> Vec<serde_json::Value> {
    let mut out = Vec::new();
    for chunk in results.chunk_by(|a, b| a.cell.eps_min == b.cell.eps_min && a.cell.nsr == b.cell.nsr) {
        let vals: Vec<f64> = chunk.iter().map(&metric).collect();
        out.push(json!({
            "eps_min": chunk[0].cell.eps_min,
            "nsr": chunk[0].cell.nsr,
            "mean": stats::mean(&vals),
        }));
    }
    out
}

/// Runs an alignment, cosine or MSE sweep and writes its CSV and metadata.
pub fn sweep_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<ExperimentOutput> {
    let metrics = Metrics::for_kind(spec.kind);
    if metrics == Metrics::default() {
        return Err(Error::Config {
            field: "kind".into(),
            reason: format!("{} is not a sweep", spec.kind.label()),
        });
    }
    let results = run_sweep(spec, metrics, jobs)?;
    let dir = spec.output_dir.clone();
    prepare_dir(&dir)?;
    let mut files = Vec::new();
    let summary;
    match spec.kind {
        ExperimentKind::AlignmentSweep => {
            let features = minority_features(spec);
            let mut rows = Vec::new();
            for r in &results {
                let a = r.alignment.as_ref().expect("alignment computed");
                for j in features.clone() {
                    rows.push(AlignmentRow {
                        seed: r.cell.seed,
                        eps_min: r.cell.eps_min,
                        nsr: r.cell.nsr,
                        feature_index: j,
                        count_ge_threshold: a.counts_ge[j],
                        max_abs_cos: a.per_feature_max[j],
                    });
                }
            }
            let path = dir.join("alignment.csv");
            write_csv(
                &path,
                &["seed", "eps_min", "nsr", "feature_index", "count_ge_threshold", "max_abs_cos"],
                &rows,
            )?;
            files.push(path);
            let j = spec.dims.d - 1;
            summary = json!({
                "mean_count_ge_threshold": grid_means(&results, |r| r.alignment.as_ref().unwrap().counts_ge[j] as f64),
                "mean_max_abs_cos": grid_means(&results, |r| r.alignment.as_ref().unwrap().per_feature_max[j]),
            });
        }
        ExperimentKind::CosineSweep => {
            let rows: Vec<CosineRow> = results
                .iter()
                .map(|r| {
                    let c = r.cosine.expect("cosine computed");
                    CosineRow {
                        seed: r.cell.seed,
                        eps_min: r.cell.eps_min,
                        nsr: r.cell.nsr,
                        mean_cosine: c.mean_cosine,
                        degenerate_pairs: c.degenerate_pairs,
                    }
                })
                .collect();
            let path = dir.join("cosine.csv");
            write_csv(&path, &["seed", "eps_min", "nsr", "mean_cosine", "degenerate_pairs"], &rows)?;
            files.push(path);
            summary = json!({ "mean_cosine": grid_means(&results, |r| r.cosine.unwrap().mean_cosine) });
        }
        ExperimentKind::MseSweep => {
            let rows: Vec<MseRow> = results
                .iter()
                .map(|r| MseRow {
                    seed: r.cell.seed,
                    eps_min: r.cell.eps_min,
                    nsr: r.cell.nsr,
                    test_mse: r.test_mse.expect("mse computed"),
                })
                .collect();
            let path = dir.join("mse.csv");
            write_csv(&path, &["seed", "eps_min", "nsr", "test_mse"], &rows)?;
            files.push(path);
            summary = json!({ "mean_test_mse": grid_means(&results, |r| r.test_mse.unwrap()) });
        }
        _ => unreachable!("checked above"),
    }
    write_metadata(spec, &mut files, &summary)?;
    Ok(ExperimentOutput { dir, files, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::defaults(kind);
        spec.dims = super::super::spec::Dims {
            d1: 12,
            d: 3,
            m: 4,
            tokens: 2,
        };
        spec.grid.eps_min = vec![0.5, 0.2];
        spec.grid.nsr = vec![0.1];
        spec.reps = 2;
        spec.train.epochs = 3;
        spec.train.batch_entries = 2;
        spec.train.negatives = 2;
        spec.eval.test_pairs = 20;
        spec.eval.probe_train_pairs = 30;
        spec.eval.probe_test_pairs = 20;
        spec
    }

    #[test]
    fn cells_are_sorted_and_complete() {
        let cs = cells(&tiny(ExperimentKind::CosineSweep));
        let keys: Vec<_> = cs.iter().map(|c| (c.eps_min, c.nsr, c.seed)).collect();
        assert_eq!(keys, vec![(0.2, 0.1, 0), (0.2, 0.1, 1), (0.5, 0.1, 0), (0.5, 0.1, 1)]);
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let spec = tiny(ExperimentKind::MseSweep);
        let m = Metrics {
            alignment: true,
            cosine: true,
            mse: true,
        };
        let a = run_sweep(&spec, m, 1).unwrap();
        let b = run_sweep(&spec, m, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.cell, y.cell);
            assert_eq!(x.cosine, y.cosine);
            assert_eq!(x.test_mse, y.test_mse);
            assert_eq!(x.alignment, y.alignment);
        }
    }

    #[test]
    fn zero_jobs_is_a_config_error() {
        let spec = tiny(ExperimentKind::CosineSweep);
        assert!(matches!(
            run_sweep(&spec, Metrics::for_kind(spec.kind), 0),
            Err(Error::Config { field, .. }) if field == "jobs"
        ));
    }
}
