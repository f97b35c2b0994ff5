//! Mean-centered PCA via a symmetric eigendecomposition.
//!
//! When there are fewer points than dimensions the eigenproblem is solved on
//! the Gram matrix instead of the covariance; both give the same components.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues at or below this fraction of `max(largest eigenvalue, mean
/// squared input norm)` count as zero. The second term keeps rounding noise
/// from being promoted to a component when all inputs are (nearly) equal.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal rows, by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalue of each component.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, vector: &[f64]) -> Result<Vec<f64>> {
        if vector.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: vector.len(),
            });
        }
        let centered: Vec<f64> = vector.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn reconstruct(&self, projection: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (coef, component) in projection.iter().zip(&self.components) {
            for (o, c) in out.iter_mut().zip(component) {
                *o += coef * c;
            }
        }
        out
    }
}

/// Fits PCA keeping the top `min(k, rank)` components.
pub fn fit_pca(vectors: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let dim = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }

    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);
    let scale = 1.0 / (n - 1) as f64;

    let use_gram = n < dim;
    let gram_or_cov = if use_gram {
        &centered * centered.transpose() * scale
    } else {
        centered.transpose() * &centered * scale
    };
    let eigen = SymmetricEigen::new(gram_or_cov);

    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let largest = eigen.eigenvalues[order[0]].max(0.0);
    let magnitude = vectors.iter().flatten().map(|x| x * x).sum::<f64>() / n as f64;
    let threshold = largest.max(magnitude) * RANK_TOLERANCE;

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    for &i in order.iter().take(k) {
        let lambda = eigen.eigenvalues[i];
        if lambda <= threshold || lambda <= 0.0 {
            break;
        }
        let mut component: Vec<f64> = if use_gram {
            // covariance eigenvector is X^T u, up to normalization
            let u = eigen.eigenvectors.column(i);
            (centered.transpose() * u).iter().copied().collect()
        } else {
            eigen.eigenvectors.column(i).iter().copied().collect()
        };
        let len = component.iter().map(|x| x * x).sum::<f64>().sqrt();
        component.iter_mut().for_each(|x| *x /= len);
        fix_sign(&mut component);
        components.push(component);
        eigenvalues.push(lambda);
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

/// Flips `v` so its first clearly nonzero coordinate is positive.
pub fn fix_sign(v: &mut [f64]) {
    let largest = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > largest * 1e-8) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
