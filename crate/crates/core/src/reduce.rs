//! Dimensionality reduction ahead of clustering: an in-core PCA and
//! ingestion of reductions computed out of process.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::vectors::{read_vectors, EmbeddingMatrix, VectorError};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("{rows} rows cannot support {n_components} components")]
    RankDeficient { rows: usize, n_components: usize },
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("n_components must be positive")]
    ZeroComponents,
    #[error("external reduction keys differ from the input keys at row {row}")]
    KeyMismatch { row: usize },
    #[error(transparent)]
    Vectors(#[from] VectorError),
}

/// Fitted principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One unit-length axis per component, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Variance along each axis (population normalization).
    pub variances: Vec<f64>,
}

/// Rows per parallel block. Blocks are fixed and summed in order so the
/// floating-point result does not depend on thread scheduling.
const BLOCK_ROWS: usize = 256;

fn blocked_sum(m: &EmbeddingMatrix, width: usize, add_row: impl Fn(&mut [f64], &[f32]) + Sync) -> Vec<f64> {
    let d = m.dim();
    let partials: Vec<Vec<f64>> = m
        .data()
        .par_chunks(d * BLOCK_ROWS)
        .map(|block| {
            let mut acc = vec![0.0f64; width];
            block.chunks_exact(d).for_each(|row| add_row(&mut acc, row));
            acc
        })
        .collect();
    partials.into_iter().fold(vec![0.0; width], |mut a, b| {
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        a
    })
}

fn column_means(m: &EmbeddingMatrix) -> Vec<f64> {
    let sum = blocked_sum(m, m.dim(), |acc, row| {
        acc.iter_mut().zip(row).for_each(|(a, &x)| *a += f64::from(x));
    });
    sum.into_iter().map(|s| s / m.rows() as f64).collect()
}

fn covariance(m: &EmbeddingMatrix, mean: &[f64]) -> DMatrix<f64> {
    let d = m.dim();
    let upper = blocked_sum(m, d * d, |acc, row| {
        let c: Vec<f64> = row.iter().zip(mean).map(|(&x, mu)| f64::from(x) - mu).collect();
        for i in 0..d {
            for j in i..d {
                acc[i * d + j] += c[i] * c[j];
            }
        }
    });
    let n = m.rows() as f64;
    DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        upper[a * d + b] / n
    })
}

impl Pca {
    pub fn fit(m: &EmbeddingMatrix, n_components: usize) -> Result<Self, ReduceError> {
        if n_components == 0 {
            return Err(ReduceError::ZeroComponents);
        }
        if m.rows() <= n_components {
            return Err(ReduceError::RankDeficient { rows: m.rows(), n_components });
        }
        if n_components > m.dim() {
            return Err(ReduceError::DimensionMismatch { expected: n_components, found: m.dim() });
        }
        let mean = column_means(m);
        let eig = SymmetricEigen::new(covariance(m, &mean));
        let mut order: Vec<usize> = (0..m.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = Vec::with_capacity(n_components);
        let mut variances = Vec::with_capacity(n_components);
        for &c in order.iter().take(n_components) {
            let mut axis: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            // sign: largest-magnitude entry positive, first index on ties
            let lead = axis
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best });
            if lead.1 < 0.0 {
                axis.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(axis);
            variances.push(eig.eigenvalues[c].max(0.0));
        }
        Ok(Self { mean, components, variances })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReduceError> {
        if m.dim() != self.mean.len() {
            return Err(ReduceError::DimensionMismatch { expected: self.mean.len(), found: m.dim() });
        }
        let data: Vec<f32> = m
            .data()
            .par_chunks_exact(m.dim())
            .flat_map_iter(|row| {
                let c: Vec<f64> = row.iter().zip(&self.mean).map(|(&x, mu)| f64::from(x) - mu).collect();
                self.components
                    .iter()
                    .map(move |axis| axis.iter().zip(&c).map(|(a, x)| a * x).sum::<f64>() as f32)
            })
            .collect();
        Ok(EmbeddingMatrix::new(self.n_components(), data, m.keys().to_vec())?)
    }
}

/// Principal-component projection onto `n_components` axes.
pub fn reduce(m: &EmbeddingMatrix, n_components: usize) -> Result<EmbeddingMatrix, ReduceError> {
    Pca::fit(m, n_components)?.transform(m)
}

/// Loads a reduction produced elsewhere, checking its dimension.
pub fn accept_external_reduction(path: &Path, n_components: usize) -> Result<EmbeddingMatrix, ReduceError> {
    let m = read_vectors(path)?;
    if m.dim() != n_components {
        return Err(ReduceError::DimensionMismatch { expected: n_components, found: m.dim() });
    }
    Ok(m)
}

/// A reduction strategy. Output rows keep the input keys and order.
pub trait Reducer: Send + Sync {
    fn name(&self) -> &'static str;
    fn reduce(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReduceError>;
}

#[derive(Debug, Clone, Copy)]
pub struct PcaReducer {
    pub n_components: usize,
}

impl Reducer for PcaReducer {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn reduce(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReduceError> {
        reduce(m, self.n_components)
    }
}

/// Reads a precomputed reduction whose keys must equal the input keys.
#[derive(Debug, Clone)]
pub struct ExternalReducer {
    pub path: PathBuf,
    pub n_components: usize,
}

impl Reducer for ExternalReducer {
    fn name(&self) -> &'static str {
        "external"
    }

    fn reduce(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix, ReduceError> {
        let r = accept_external_reduction(&self.path, self.n_components)?;
        if let Some(row) = (0..m.rows().max(r.rows())).find(|&i| m.keys().get(i) != r.keys().get(i)) {
            return Err(ReduceError::KeyMismatch { row });
        }
        Ok(r)
    }
}
