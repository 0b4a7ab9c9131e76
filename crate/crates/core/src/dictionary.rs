//! Column-orthonormal feature dictionary.
//!
//! The first `d` vectors of a seeded orthonormal basis of `R^{d1}` are the
//! features `M_1..M_d`; the remaining `d1 - d` span their orthogonal
//! complement and are kept for non-feature diagnostics.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::LabRng;

const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    d1: usize,
    d: usize,
    /// `d x d1`, row `j` is feature `M_j`.
    #[serde(with = "crate::nested::matrix")]
    features: Array2<f64>,
    /// `(d1 - d) x d1`, rows span the orthogonal complement.
    #[serde(with = "crate::nested::matrix")]
    complement: Array2<f64>,
}

impl Dictionary {
    /// Orthonormalizes a seeded standard-Gaussian `d1 x d1` matrix with
    /// modified Gram-Schmidt (two passes) and splits the basis.
    pub fn build(d1: usize, d: usize, seed: u64) -> Result<Self> {
        if d1 == 0 || d == 0 {
            return Err(Error::dim(format!("d1 = {d1} and d = {d} must be positive")));
        }
        if d > d1 {
            return Err(Error::dim(format!("feature count d = {d} exceeds d1 = {d1}")));
        }
        let mut rng: LabRng = rand::SeedableRng::seed_from_u64(seed);
        let mut basis = Array2::<f64>::zeros((d1, d1));
        for v in basis.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        gram_schmidt_rows(&mut basis)?;
        for mut row in basis.rows_mut() {
            if let Some(first) = row.iter().copied().find(|v| *v != 0.0) {
                if first < 0.0 {
                    row.mapv_inplace(|v| -v);
                }
            }
        }
        let features = basis.slice(s![..d, ..]).to_owned();
        let complement = basis.slice(s![d.., ..]).to_owned();
        let dict = Dictionary {
            d1,
            d,
            features,
            complement,
        };
        dict.warn_if_coherent();
        Ok(dict)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn feature(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.row(j)
    }

    /// Features as rows (`d x d1`), i.e. `M^T`.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Complement basis as rows (`(d1 - d) x d1`).
    pub fn complement(&self) -> ArrayView2<'_, f64> {
        self.complement.view()
    }

    /// `M` as a `d1 x d` matrix.
    pub fn matrix(&self) -> Array2<f64> {
        self.features.t().to_owned()
    }

    /// Maps latent coordinates `z` (length `d`) to `M z`.
    pub fn synthesize(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        self.features.t().dot(&z)
    }

    /// Returns `(M^T v, ||v||^2 - ||M^T v||^2)`.
    pub fn project_feature(&self, v: ArrayView1<'_, f64>) -> Result<(Array1<f64>, f64)> {
        self.check_len(v)?;
        let feature_part = self.features.dot(&v);
        let complement_norm_sq = v.dot(&v) - feature_part.dot(&feature_part);
        Ok((feature_part, complement_norm_sq))
    }

    /// Coordinates of `v` along the complement basis.
    pub fn project_complement(&self, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_len(v)?;
        Ok(self.complement.dot(&v))
    }

    /// `max_j ||M_j||_inf`.
    pub fn incoherence(&self) -> f64 {
        self.features.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Soft bound `5 sqrt(ln d1 / d1)` on [`Dictionary::incoherence`].
    pub fn incoherence_bound(&self) -> f64 {
        let d1 = self.d1 as f64;
        5.0 * (d1.ln() / d1).sqrt()
    }

    /// Checks orthonormality of the stored basis; used after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.features.dim() != (self.d, self.d1)
            || self.complement.dim() != (self.d1 - self.d.min(self.d1), self.d1)
        {
            return Err(Error::dim("dictionary arrays do not match (d1, d)"));
        }
        let gram = self.features.dot(&self.features.t());
        let eye = Array2::<f64>::eye(self.d);
        let err = (&gram - &eye).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if err > ORTHO_TOL {
            return Err(Error::dim(format!("features not orthonormal (max error {err:e})")));
        }
        let cross = self.complement.dot(&self.features.t());
        let err = cross.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if err > ORTHO_TOL {
            return Err(Error::dim(format!(
                "complement not orthogonal to features (max error {err:e})"
            )));
        }
        Ok(())
    }

    fn warn_if_coherent(&self) {
        if self.d1 > 1 && self.incoherence() > self.incoherence_bound() {
            log::warn!(
                "dictionary incoherence {:.4} exceeds soft bound {:.4}",
                self.incoherence(),
                self.incoherence_bound()
            );
        }
    }

    fn check_len(&self, v: ArrayView1<'_, f64>) -> Result<()> {
        if v.len() != self.d1 {
            return Err(Error::dim(format!(
                "vector has length {}, dictionary expects d1 = {}",
                v.len(),
                self.d1
            )));
        }
        Ok(())
    }
}

/// In-place modified Gram-Schmidt over the rows, run twice for
/// orthogonality at machine precision.
fn gram_schmidt_rows(a: &mut Array2<f64>) -> Result<()> {
    let n = a.nrows();
    for _pass in 0..2 {
        for k in 0..n {
            let (done, mut rest) = a.view_mut().split_at(Axis(0), k);
            let mut row = rest.row_mut(0);
            for q in done.rows() {
                let proj = q.dot(&row);
                row.scaled_add(-proj, &q);
            }
            let norm = row.dot(&row).sqrt();
            if norm < 1e-12 {
                return Err(Error::dim("Gaussian draw was rank deficient"));
            }
            row.mapv_inplace(|v| v / norm);
        }
    }
    Ok(())
}
