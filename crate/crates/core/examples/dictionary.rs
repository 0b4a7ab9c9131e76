//! Builds feature dictionaries and checks their geometry.

use contrastive_lab::dictionary::Dictionary;
use ndarray::Array1;

fn main() -> contrastive_lab::Result<()> {
    for (d1, d) in [(8, 3), (100, 10), (500, 9)] {
        let dict = Dictionary::build(d1, d, 42)?;
        let gram = dict.features().dot(&dict.features().t());
        let off = gram
            .indexed_iter()
            .map(|((i, j), v)| if i == j { (v - 1.0).abs() } else { v.abs() })
            .fold(0.0, f64::max);
        println!(
            "d1={d1:>3} d={d:>2}  max|MM^T - I| {off:.1e}  incoherence {:.4} (bound {:.4})",
            dict.incoherence(),
            dict.incoherence_bound()
        );
    }

    // Split a vector into its feature and complement parts.
    let dict = Dictionary::build(16, 4, 7)?;
    let v: Array1<f64> = (0..16).map(|k| (k as f64 * 0.7).sin()).collect();
    let (coeffs, feature_sq) = dict.project_feature(v.view())?;
    let rest = dict.project_complement(v.view())?;
    println!("feature coefficients {coeffs:.3}");
    println!(
        "||v||^2 = {:.6}, feature part {feature_sq:.6} + complement part {:.6}",
        v.dot(&v),
        rest.dot(&rest)
    );
    Ok(())
}
