//! Column-wise z-scoring with training statistics.

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RffGamError};

/// Per-column mean/standard-deviation transform estimated on training data.
///
/// Standard deviations use the unbiased (n-1) estimator. Columns that are
/// constant on the training data get a unit divisor so they map to zero
/// rather than NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Estimate column statistics from a training matrix.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(RffGamError::invalid("cannot standardize an empty matrix"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RffGamError::invalid("non-finite value in input matrix"));
        }
        let mut mean = vec![0.0; p];
        let mut std = vec![1.0; p];
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / n as f64;
            mean[j] = m;
            if n > 1 {
                let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
                let s = (ss / (n - 1) as f64).sqrt();
                std[j] = if s > 0.0 { s } else { 1.0 };
            }
        }
        Ok(Self { mean, std })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Apply the transform to a matrix with matching column count.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(RffGamError::invalid(format!(
                "standardizer expects {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for j in 0..self.mean.len() {
            let (m, s) = (self.mean[j], self.std[j]);
            out.column_mut(j).mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    /// Invert the transform (used when synthesising perturbed inputs back in
    /// raw units).
    pub fn inverse(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(RffGamError::invalid(format!(
                "standardizer expects {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for j in 0..self.mean.len() {
            let (m, s) = (self.mean[j], self.std[j]);
            out.column_mut(j).mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }
}
