//! CSV and metadata writers.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::spec::{ExperimentKind, ExperimentSpec};
use crate::error::{Error, Result};
use crate::evaluation::PROBE_TARGET;
use crate::trainer::EpochRecord;

pub const TRAINING_LOG_HEADER: &[&str] = &[
    "epoch",
    "loss_infonce",
    "loss_total",
    "mean_pos_logit",
    "min_neuron_norm",
    "max_neuron_norm",
    "pruned_indices",
    "t1_flag",
    "t2_flag",
];

/// Files written by one experiment, plus kind-specific summary numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Writes `rows` under an explicit header, so empty tables still get one.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_training_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    write_csv(path, TRAINING_LOG_HEADER, log)
}

pub(crate) fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Serialize)]
struct Resolved {
    base_rate: f64,
    tau: f64,
    eta: f64,
    lambda: f64,
    sigma0: f64,
    magnitude_law: String,
    batch_entries: usize,
    negatives: usize,
    epochs: usize,
    align_threshold: f64,
    gamma: f64,
    ridge: f64,
    probe_target: &'static str,
    value_projection: &'static str,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    crate_version: &'static str,
    kind: ExperimentKind,
    resolved: Resolved,
    deviations: Vec<&'static str>,
    spec: &'a ExperimentSpec,
    files: Vec<String>,
    summary: &'a Value,
}

fn deviations(kind: ExperimentKind) -> Vec<&'static str> {
    let mut v = vec![
        "activation probability p_j = min(1, eps_j * base_rate) with a constant base_rate instead of an asymptotic log-log rate",
        "value projection fixed to the identity; query and key projections frozen at the identity unless train_attention is set",
        "eta, lambda, tau, sigma0, batch_entries and negatives are desk-scale choices, not asymptotic orders",
        "active latent magnitudes drawn i.i.d. from the magnitude law; positives share support and signs and redraw magnitudes and noise",
    ];
    if matches!(
        kind,
        ExperimentKind::AlignmentSweep | ExperimentKind::CosineSweep | ExperimentKind::MseSweep
    ) {
        v.push("m, d, tokens and epochs for sweeps are unstated upstream; defaults m=50, d=10, tokens=2, epochs=400");
    }
    if kind == ExperimentKind::MseSweep {
        v.push("probe target is the token-summed anchor latent, averaged over coordinates");
    }
    v
}

/// Writes `spec.json` and `metadata.json`; `files` are the experiment's
/// data files.
pub(crate) fn write_metadata(
    spec: &ExperimentSpec,
    files: &mut Vec<PathBuf>,
    summary: &Value,
) -> Result<()> {
    let dir = &spec.output_dir;
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, spec.to_json() + "\n").map_err(|e| Error::io(&spec_path, e))?;
    files.push(spec_path);
    let meta_path = dir.join("metadata.json");
    files.push(meta_path.clone());
    let names = files
        .iter()
        .map(|f| {
            f.strip_prefix(dir)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    let t = &spec.train;
    let meta = Metadata {
        crate_version: env!("CARGO_PKG_VERSION"),
        kind: spec.kind,
        resolved: Resolved {
            base_rate: spec.profile.base_rate,
            tau: t.tau,
            eta: t.eta,
            lambda: t.lambda,
            sigma0: t.sigma0_for(spec.dims.d1),
            magnitude_law: spec.profile.magnitude.label(),
            batch_entries: t.batch_entries,
            negatives: t.negatives,
            epochs: t.epochs,
            align_threshold: spec.eval.align_threshold,
            gamma: spec.eval.gamma,
            ridge: spec.eval.ridge,
            probe_target: PROBE_TARGET,
            value_projection: "identity",
        },
        deviations: deviations(spec.kind),
        spec,
        files: names,
        summary,
    };
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}
