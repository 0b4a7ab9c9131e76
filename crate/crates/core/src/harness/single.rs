//! Single-run experiments: the alignment heatmap and the stage probe.

use serde::Serialize;
use serde_json::json;

use super::checkpoint::Checkpoint;
use super::output::{prepare_dir, write_csv, write_metadata, write_training_log, ExperimentOutput};
use super::spec::{ExperimentKind, ExperimentSpec};
use crate::analytics::{alignment_matrix, heatmap_patterns, AlignmentReport, HeatmapPatterns};
use crate::dictionary::Dictionary;
use crate::encoder::EncoderState;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::trainer::{EpochRecord, StageReport, Trainer};

/// Heatmap thresholds: a strong entry and the off-feature ceiling.
pub const STRONG_SQ_COS: f64 = 0.09;
pub const WEAK_SQ_COS: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct SingleRun {
    pub init: AlignmentReport,
    pub trained: AlignmentReport,
    pub patterns: HeatmapPatterns,
    pub log: Vec<EpochRecord>,
    pub stages: StageReport,
    pub checkpoint: Checkpoint,
}

impl SingleRun {
    pub fn init_mean_sq_cos(&self) -> f64 {
        self.init.sq_cos.mean().unwrap_or(0.0)
    }
}

/// Trains the single model of a heatmap or stage-probe spec.
pub fn run_single(spec: &ExperimentSpec) -> Result<SingleRun> {
    spec.validate()?;
    let (eps_min, nsr) = (spec.grid.eps_min[0], spec.grid.nsr[0]);
    let seed = spec.seed;
    let dict = Dictionary::build(spec.dims.d1, spec.dims.d, seed)?;
    let profile = spec.feature_profile(eps_min)?;
    let cfg = spec.train_config(seed);
    let init_state = EncoderState::init(
        spec.dims.m,
        spec.dims.d1,
        cfg.sigma0_for(spec.dims.d1),
        &mut rng::stream(seed, Stream::Init),
    )?;
    let init = alignment_matrix(&init_state.weights, &dict, spec.eval.align_threshold)?;
    let mut trainer = Trainer::new(&dict, &profile, spec.noise(nsr)?, spec.dims.model(), cfg)?;
    let mut log = Vec::with_capacity(spec.train.epochs);
    while !trainer.is_done() {
        log.push(trainer.run_epoch()?);
    }
    let trained = alignment_matrix(&trainer.state().weights, &dict, spec.eval.align_threshold)?;
    let patterns = heatmap_patterns(&trained.sq_cos, STRONG_SQ_COS, WEAK_SQ_COS);
    let checkpoint = Checkpoint::capture(&trainer);
    Ok(SingleRun {
        init,
        trained,
        patterns,
        log,
        stages: trainer.stages().clone(),
        checkpoint,
    })
}

fn write_heatmap(path: &std::path::Path, report: &AlignmentReport) -> Result<()> {
    let d = report.sq_cos.ncols();
    let header: Vec<String> = (0..d).map(|j| format!("feature_{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = report.sq_cos.rows().into_iter().map(|r| r.to_vec()).collect();
    write_csv(path, &header, &rows)
}

#[derive(Serialize)]
struct StageRow {
    epoch: usize,
    min_feature_mass_ratio: f64,
    mean_feature_mass_ratio: f64,
    max_norm_ratio: Option<f64>,
    t1_condition: u8,
    t2_condition: u8,
}

/// Heatmap: `heatmap.csv` (trained), `heatmap_init.csv`, the training log
/// and a final checkpoint. Stage probe: the training log, `stages.csv` and
/// a final checkpoint.
pub fn single_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    if !matches!(spec.kind, ExperimentKind::Heatmap | ExperimentKind::StageProbe) {
        return Err(Error::Config {
            field: "kind".into(),
            reason: format!("{} is not a single-run experiment", spec.kind.label()),
        });
    }
    let run = run_single(spec)?;
    let dir = spec.output_dir.clone();
    prepare_dir(&dir)?;
    let mut files = Vec::new();
    let log_path = dir.join("training_log.csv");
    write_training_log(&log_path, &run.log)?;
    files.push(log_path);
    let summary = match spec.kind {
        ExperimentKind::Heatmap => {
            let path = dir.join("heatmap.csv");
            write_heatmap(&path, &run.trained)?;
            files.push(path);
            let path = dir.join("heatmap_init.csv");
            write_heatmap(&path, &run.init)?;
            files.push(path);
            json!({
                "init_mean_sq_cos": run.init_mean_sq_cos(),
                "trained_mean_sq_cos": run.trained.sq_cos.mean().unwrap_or(0.0),
                "single_feature_neurons": run.patterns.single_feature,
                "mixed_neurons": run.patterns.mixed,
                "strong_sq_cos": STRONG_SQ_COS,
                "weak_sq_cos": WEAK_SQ_COS,
            })
        }
        _ => {
            let rows: Vec<StageRow> = run
                .stages
                .per_epoch
                .iter()
                .enumerate()
                .map(|(epoch, o)| {
                    let r = &o.feature_mass_ratio;
                    StageRow {
                        epoch,
                        min_feature_mass_ratio: r.iter().copied().fold(f64::INFINITY, f64::min),
                        mean_feature_mass_ratio: r.iter().sum::<f64>() / r.len() as f64,
                        max_norm_ratio: o
                            .norm_ratio
                            .as_ref()
                            .map(|v| v.iter().copied().fold(0.0, f64::max)),
                        t1_condition: o.t1_condition as u8,
                        t2_condition: o.t2_condition as u8,
                    }
                })
                .collect();
            let path = dir.join("stages.csv");
            write_csv(
                &path,
                &[
                    "epoch",
                    "min_feature_mass_ratio",
                    "mean_feature_mass_ratio",
                    "max_norm_ratio",
                    "t1_condition",
                    "t2_condition",
                ],
                &rows,
            )?;
            files.push(path);
            json!({
                "t1_hit_epoch": run.stages.t1_hit_epoch,
                "t2_hit_epoch": run.stages.t2_hit_epoch,
                "final_loss_infonce": run.log.last().map(|r| r.loss_infonce),
            })
        }
    };
    let ckpt = dir.join("checkpoints").join("final.json");
    run.checkpoint.save(&ckpt)?;
    files.push(ckpt);
    write_metadata(spec, &mut files, &summary)?;
    Ok(ExperimentOutput { dir, files, summary })
}
