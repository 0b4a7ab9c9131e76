//! Runs a small cosine sweep through the harness and prints the CSV.

use contrastive_lab::harness::{run_experiment, ExperimentSpec};

fn main() -> contrastive_lab::Result<()> {
    let dir = std::env::temp_dir().join("lab-sweep-example");
    let spec = ExperimentSpec::from_json(&format!(
        r#"{{
            "kind": "cosine_sweep",
            "dims": {{"d1": 100, "d": 6, "m": 24, "tokens": 2}},
            "grid": {{"eps_min": [0.1, 0.3, 0.5], "nsr": [0.2, 1.0]}},
            "reps": 2,
            "train": {{"epochs": 100}},
            "eval": {{"test_pairs": 1000}},
            "output_dir": {:?}
        }}"#,
        dir.to_string_lossy()
    ))?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = run_experiment(&spec, jobs)?;
    print!("{}", std::fs::read_to_string(dir.join("cosine.csv")).unwrap());
    println!("summary: {}", serde_json::to_string_pretty(&out.summary).unwrap());
    println!("files: {:?}", out.files);
    Ok(())
}
