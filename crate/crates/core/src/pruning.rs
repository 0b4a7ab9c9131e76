//! Forward magnitude masks.
//!
//! The `floor(alpha * m)` neurons with the smallest l2 norm are switched off
//! in the forward pass. Ties are broken by index, lower index pruned first.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    /// `true` = neuron participates in the forward pass.
    pub active: Vec<bool>,
    pub pruned_count: usize,
}

impl PruneMask {
    pub fn all_active(m: usize) -> Self {
        PruneMask {
            active: vec![true; m],
            pruned_count: 0,
        }
    }

    /// Indices of pruned neurons, ascending.
    pub fn pruned_indices(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, a)| !**a)
            .map(|(i, _)| i)
            .collect()
    }

    /// `pruned_indices` joined by `;` for the training log.
    pub fn log_field(&self) -> String {
        self.pruned_indices()
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

pub fn pruned_count(m: usize, alpha: f64) -> usize {
    (alpha * m as f64).floor() as usize
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("pruning ratio must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// Mask from precomputed neuron norms.
pub fn mask_from_norms(norms: &[f64], alpha: f64) -> Result<PruneMask> {
    check_alpha(alpha)?;
    let m = norms.len();
    let count = pruned_count(m, alpha);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    let mut active = vec![true; m];
    for &i in order.iter().take(count) {
        active[i] = false;
    }
    Ok(PruneMask {
        active,
        pruned_count: count,
    })
}

/// Mask over the rows of an `m x d1` weight matrix.
pub fn magnitude_mask(weights: &Array2<f64>, alpha: f64) -> Result<PruneMask> {
    let norms: Vec<f64> = weights.rows().into_iter().map(|w| w.dot(&w).sqrt()).collect();
    mask_from_norms(&norms, alpha)
}

/// Warns when more neurons are pruned than there are neurons estimated to
/// carry the minority feature; returns the warning text if emitted.
pub fn check_minority_capacity(mask: &PruneMask, minority_aligned: usize) -> Option<String> {
    if mask.pruned_count > minority_aligned {
        let msg = format!(
            "pruning {} neurons exceeds the {} neurons estimated to align with the minority feature",
            mask.pruned_count, minority_aligned
        );
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    }
}
