use std::path::Path;

use contrastive_lab::harness::{self, Checkpoint, ExperimentKind, ExperimentSpec};
use contrastive_lab::Error;

fn tiny(kind: ExperimentKind, dir: &Path) -> ExperimentSpec {
    let text = format!(
        r#"{{
            "kind": "{}",
            "dims": {{"d1": 24, "d": 4, "m": 8, "tokens": 2}},
            "reps": 1,
            "train": {{"epochs": 8, "batch_entries": 4, "negatives": 3}},
            "eval": {{"test_pairs": 50, "probe_train_pairs": 40, "probe_test_pairs": 30}},
            "output_dir": {:?}
        }}"#,
        kind.label(),
        dir.to_str().unwrap()
    );
    ExperimentSpec::from_json(&text).unwrap()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn one_cell_one_rep_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = tiny(ExperimentKind::MseSweep, tmp.path());
    spec.grid.eps_min = vec![0.3];
    spec.grid.nsr = vec![0.2];
    harness::run_experiment(&spec, 1).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("mse.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "seed,eps_min,nsr,test_mse");
    assert_eq!(data_rows(&tmp.path().join("mse.csv")), 1);
}

#[test]
fn three_by_two_grid_with_five_reps_gives_thirty_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = tiny(ExperimentKind::CosineSweep, tmp.path());
    spec.grid.eps_min = vec![0.1, 0.4, 0.7];
    spec.grid.nsr = vec![0.2, 1.0];
    spec.reps = 5;
    spec.train.epochs = 2;
    harness::run_experiment(&spec, 4).unwrap();
    let path = tmp.path().join("cosine.csv");
    assert_eq!(data_rows(&path), 30);
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "seed,eps_min,nsr,mean_cosine,degenerate_pairs");

    let mut align = spec.clone();
    align.kind = ExperimentKind::AlignmentSweep;
    align.output_dir = tmp.path().join("align");
    harness::run_experiment(&align, 2).unwrap();
    let path = align.output_dir.join("alignment.csv");
    assert_eq!(data_rows(&path), 30);
    let header = std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "seed,eps_min,nsr,feature_index,count_ge_threshold,max_abs_cos");
}

fn run_bytes(spec: &ExperimentSpec, jobs: usize) -> Vec<(String, Vec<u8>)> {
    let out = harness::run_experiment(spec, jobs).unwrap();
    out.files
        .iter()
        .map(|f| {
            (
                f.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(f).unwrap(),
            )
        })
        .collect()
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    for kind in [
        ExperimentKind::AlignmentSweep,
        ExperimentKind::CosineSweep,
        ExperimentKind::MseSweep,
        ExperimentKind::PruneAb,
    ] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut spec = tiny(kind, a.path());
        spec.grid.eps_min = vec![0.2, 0.6];
        spec.grid.nsr = vec![0.5];
        spec.reps = 3;
        if kind == ExperimentKind::PruneAb {
            spec.prune_alphas = vec![0.25];
        }
        let first = run_bytes(&spec, 1);
        // metadata.json records output_dir, so compare data files only.
        spec.output_dir = b.path().to_path_buf();
        let second = run_bytes(&spec, 4);
        for ((na, ba), (nb, bb)) in first.iter().zip(&second) {
            assert_eq!(na, nb);
            if na.ends_with(".csv") {
                assert_eq!(ba, bb, "{kind:?} {na} differs between jobs=1 and jobs=4");
            }
        }
        spec.output_dir = a.path().to_path_buf();
        assert_eq!(first, run_bytes(&spec, 2), "{kind:?} rerun differs");
    }
}

#[test]
fn heatmap_writes_matrix_log_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::defaults(ExperimentKind::Heatmap);
    spec.dims.d1 = 60;
    spec.train.epochs = 5;
    spec.output_dir = tmp.path().to_path_buf();
    harness::run_experiment(&spec, 1).unwrap();
    let heat = std::fs::read_to_string(tmp.path().join("heatmap.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines.len(), 1 + 24);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 9));
    let log = std::fs::read_to_string(tmp.path().join("training_log.csv")).unwrap();
    assert_eq!(
        log.lines().next().unwrap(),
        "epoch,loss_infonce,loss_total,mean_pos_logit,min_neuron_norm,max_neuron_norm,pruned_indices,t1_flag,t2_flag"
    );
    assert_eq!(log.lines().count(), 1 + 5);
    let ckpt = Checkpoint::load(&tmp.path().join("checkpoints/final.json")).unwrap();
    assert_eq!(ckpt.epoch, 5);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("metadata.json")).unwrap()).unwrap();
    for key in ["base_rate", "tau", "eta", "lambda", "sigma0", "magnitude_law"] {
        assert!(meta["resolved"].get(key).is_some(), "metadata lacks {key}");
    }
}

#[test]
fn stage_probe_writes_stage_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::defaults(ExperimentKind::StageProbe);
    spec.dims.d1 = 40;
    spec.train.epochs = 6;
    spec.output_dir = tmp.path().to_path_buf();
    harness::run_experiment(&spec, 1).unwrap();
    assert_eq!(data_rows(&tmp.path().join("stages.csv")), 6);
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = tiny(ExperimentKind::Heatmap, tmp.path());
    spec.train.alpha = 0.25;
    harness::run_experiment(&spec, 1).unwrap();
    let path = tmp.path().join("checkpoints/final.json");
    let first = std::fs::read(&path).unwrap();
    let again = tmp.path().join("again.json");
    Checkpoint::load(&path).unwrap().save(&again).unwrap();
    assert_eq!(first, std::fs::read(&again).unwrap());
}

#[test]
fn corrupted_checkpoint_reports_byte_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tiny(ExperimentKind::Heatmap, tmp.path());
    harness::run_experiment(&spec, 1).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("checkpoints/final.json")).unwrap();
    let at = text.find("\"weights\"").unwrap() + 40;
    let mut bad = text.clone();
    bad.replace_range(at..at + 1, "#");
    match Checkpoint::from_json(&bad) {
        Err(Error::Parse { offset, .. }) => assert!(offset.abs_diff(at) <= 1, "offset {offset}, corrupted {at}"),
        other => panic!("expected parse error, got {other:?}"),
    }
    let v0 = text.replacen("\"v1\"", "\"v0\"", 1);
    assert!(matches!(Checkpoint::from_json(&v0), Err(Error::VersionMismatch { .. })));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut spec = tiny(ExperimentKind::MseSweep, &blocker.join("sub"));
    spec.grid.eps_min = vec![0.5];
    spec.grid.nsr = vec![0.1];
    let err = harness::run_experiment(&spec, 1).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}
