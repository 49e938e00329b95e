//! Latent-space construction: PCA of the intermediate Fourier features and
//! the projection h(x) = V_d(s(x) − s̄), plus a density-weighted PCA of the
//! frequency sample used for anisotropy reporting.

use ndarray::prelude::*;

use crate::error::{Result, RffGamError};
use crate::linalg::{eigh_descending, gram};

/// Projection onto the top principal directions of the intermediate features.
#[derive(Debug, Clone)]
pub struct LatentProjector {
    /// Column mean s̄ of the training feature matrix (length K).
    pub s_mean: Array1<f64>,
    /// d×K matrix whose rows are the top right singular directions.
    pub v_d: Array2<f64>,
    /// Corresponding singular values of the centered feature matrix,
    /// non-increasing.
    pub singular_values: Array1<f64>,
}

/// Weighted-PCA summary of a frequency sample.
#[derive(Debug, Clone)]
pub struct FrequencyAnalysis {
    /// p×p matrix whose columns are the principal directions v₁, v₂, …
    pub principal_directions: Array2<f64>,
    /// Weighted eigenvalues, non-negative and descending.
    pub weighted_eigenvalues: Array1<f64>,
    /// Bandwidth used for the kernel density weights.
    pub kde_bandwidth: f64,
}

/// Principal-component analysis of the (centered) feature matrix.
///
/// The right singular directions are obtained from the eigen-decomposition
/// of the K×K Gram matrix of the centered features; at the scales this
/// pipeline runs (K ≤ 4000, N up to tens of thousands) that is both exact
/// and considerably cheaper than a full dense SVD of the N×K matrix.
pub fn fit_pca(s: &Array2<f64>, d: usize) -> Result<LatentProjector> {
    let (n, k) = s.dim();
    if d == 0 || d > n.min(k) {
        return Err(RffGamError::invalid(format!(
            "PCA dimension {d} out of range for a {n}×{k} matrix"
        )));
    }
    let s_mean = s
        .mean_axis(Axis(0))
        .ok_or_else(|| RffGamError::invalid("empty feature matrix"))?;
    let centered = s - &s_mean.view().insert_axis(Axis(0));
    let g = gram(&centered);
    let (vals, vecs) = eigh_descending(&g)?;
    let mut v_d = Array2::zeros((d, k));
    let mut singular_values = Array1::zeros(d);
    for r in 0..d {
        v_d.row_mut(r).assign(&vecs.column(r));
        singular_values[r] = vals[r].max(0.0).sqrt();
    }
    Ok(LatentProjector {
        s_mean,
        v_d,
        singular_values,
    })
}

impl LatentProjector {
    pub fn latent_dim(&self) -> usize {
        self.v_d.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.v_d.ncols()
    }

    /// Project one feature vector: V_d (s − s̄).
    pub fn project(&self, s: &Array1<f64>) -> Result<Array1<f64>> {
        if s.len() != self.s_mean.len() {
            return Err(RffGamError::invalid(format!(
                "projector expects length {}, got {}",
                self.s_mean.len(),
                s.len()
            )));
        }
        let centered = s - &self.s_mean;
        Ok(self.v_d.dot(&centered))
    }

    /// Project a batch of feature rows into the latent space: (S − s̄)·V_dᵀ.
    pub fn project_rows(&self, s: &Array2<f64>) -> Result<Array2<f64>> {
        if s.ncols() != self.s_mean.len() {
            return Err(RffGamError::invalid(format!(
                "projector expects {} columns, got {}",
                self.s_mean.len(),
                s.ncols()
            )));
        }
        let centered = s - &self.s_mean.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.v_d.t()))
    }

    /// Keep only the first `d` directions (used by the grid search, which
    /// fits once at the largest d and slices).
    pub fn truncate(&self, d: usize) -> Result<LatentProjector> {
        if d == 0 || d > self.latent_dim() {
            return Err(RffGamError::invalid(format!(
                "cannot truncate a {}-dim projector to {d}",
                self.latent_dim()
            )));
        }
        // assemble rather than slice+to_owned: the latter can yield a
        // zero-stride axis for d = 1, steering later products off the BLAS
        // path and changing summation order relative to a direct fit
        let mut v_d = Array2::zeros((d, self.feature_dim()));
        v_d.assign(&self.v_d.slice(s![..d, ..]));
        Ok(LatentProjector {
            s_mean: self.s_mean.clone(),
            v_d,
            singular_values: self.singular_values.slice(s![..d]).to_owned(),
        })
    }
}

/// Scott's-rule bandwidth for a Gaussian KDE on the rows of `omega`:
/// n^{-1/(p+4)} times the root-mean per-coordinate standard deviation.
pub fn scott_bandwidth(omega: &Array2<f64>) -> f64 {
    let (n, p) = omega.dim();
    let mut var_sum = 0.0;
    for j in 0..p {
        let col = omega.column(j);
        let m = col.sum() / n as f64;
        var_sum += col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0);
    }
    let sigma_bar = (var_sum / p as f64).sqrt();
    sigma_bar * (n as f64).powf(-1.0 / (p as f64 + 4.0))
}

/// Density-weighted PCA of the frequency rows.
///
/// Each row gets a weight from a Rosenblatt–Parzen Gaussian kernel density
/// estimate evaluated at the row itself; the weighted (weighted-mean
/// centered) second-moment matrix is then eigen-decomposed. Weighting by
/// the estimated density emphasizes the bulk of the frequency sample over
/// stray tails when reporting dominant directions.
pub fn weighted_frequency_pca(
    omega: &Array2<f64>,
    kde_bandwidth: f64,
) -> Result<FrequencyAnalysis> {
    let (n, p) = omega.dim();
    if n < p + 1 {
        return Err(RffGamError::invalid(format!(
            "need at least p+1 = {} frequency rows, got {n}",
            p + 1
        )));
    }
    if !(kde_bandwidth > 0.0) {
        return Err(RffGamError::invalid("KDE bandwidth must be positive"));
    }

    let weights = kde_self_density(omega, kde_bandwidth);
    let total: f64 = weights.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(RffGamError::numerical("degenerate KDE weights"));
    }
    let wn = &weights / total;

    // Weighted mean, then weighted second moment of centered rows.
    let mut mean = Array1::zeros(p);
    for (i, row) in omega.rows().into_iter().enumerate() {
        mean.scaled_add(wn[i], &row);
    }
    let mut m = Array2::zeros((p, p));
    for (i, row) in omega.rows().into_iter().enumerate() {
        let c = &row - &mean;
        for a in 0..p {
            for b in 0..p {
                m[[a, b]] += wn[i] * c[a] * c[b];
            }
        }
    }
    let (vals, vecs) = eigh_descending(&m)?;
    Ok(FrequencyAnalysis {
        principal_directions: vecs,
        weighted_eigenvalues: vals.mapv(|v| v.max(0.0)),
        kde_bandwidth,
    })
}

/// Gaussian KDE of the rows of `x`, evaluated at each row (leave-self-in),
/// up to a constant factor common to all rows. Blocked so the pairwise
/// distance buffer stays modest for large samples.
fn kde_self_density(x: &Array2<f64>, h: f64) -> Array1<f64> {
    let n = x.nrows();
    let inv_2h2 = 1.0 / (2.0 * h * h);
    let sq_norms: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect();
    let mut density = Array1::zeros(n);
    const BLOCK: usize = 512;
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        // inner products between the block rows and all rows
        let prod = x.slice(s![start..end, ..]).dot(&x.t());
        for i in start..end {
            let row = prod.row(i - start);
            let mut acc = 0.0;
            for j in 0..n {
                let d2 = (sq_norms[i] + sq_norms[j] - 2.0 * row[j]).max(0.0);
                acc += (-d2 * inv_2h2).exp();
            }
            density[i] = acc;
        }
        start = end;
    }
    // Normalizing constants (kernel volume, 1/n) are common factors and the
    // weights are renormalized downstream, so they are omitted here.
    density
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, k: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, Stream::FrequencySample);
        Array2::from_shape_fn((n, k), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        })
    }

    #[test]
    fn rows_are_orthonormal() {
        let s = random_matrix(20, 6, 3);
        let proj = fit_pca(&s, 4).unwrap();
        let gram = proj.v_d.dot(&proj.v_d.t());
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_rank_reconstruction() {
        let s = random_matrix(20, 6, 4);
        let proj = fit_pca(&s, 6).unwrap();
        let z = proj.project_rows(&s).unwrap();
        let recon = z.dot(&proj.v_d) + &proj.s_mean.view().insert_axis(Axis(0));
        let num: f64 = (&recon - &s).iter().map(|v| v * v).sum::<f64>().sqrt();
        let den: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-8, "relative reconstruction error {}", num / den);
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let s = random_matrix(15, 5, 5);
        let proj = fit_pca(&s, 3).unwrap();
        let z = proj.project(&proj.s_mean.clone()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn basis_row_projects_to_standard_basis() {
        let s = random_matrix(15, 5, 6);
        let proj = fit_pca(&s, 3).unwrap();
        let c = 2.75;
        for r in 0..3 {
            let input = &proj.s_mean + &(c * &proj.v_d.row(r).to_owned());
            let z = proj.project(&input).unwrap();
            for i in 0..3 {
                let want = if i == r { c } else { 0.0 };
                assert!((z[i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn retained_variance_matches_covariance_eigen_oracle() {
        let s = random_matrix(20, 6, 7);
        let proj = fit_pca(&s, 3).unwrap();

        // Oracle: eigenvalues of the 6×6 scatter matrix via Jacobi sweeps
        // (unnormalized, so they match squared singular values directly).
        let mean = s.mean_axis(Axis(0)).unwrap();
        let centered = &s - &mean.view().insert_axis(Axis(0));
        let mut cov = centered.t().dot(&centered);
        let mut eigvals = jacobi_eigenvalues(&mut cov);
        eigvals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for i in 0..3 {
            let got = proj.singular_values[i] * proj.singular_values[i];
            assert!(
                (got - eigvals[i]).abs() <= 1e-9 * eigvals[0].max(1.0),
                "eigenvalue {i}: got {got}, oracle {}",
                eigvals[i]
            );
        }
    }

    /// Classical cyclic Jacobi eigenvalue iteration for small symmetric
    /// matrices — an independent check on the LAPACK path.
    fn jacobi_eigenvalues(a: &mut Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[[i, j]] * a[[i, j]];
                }
            }
            if off < 1e-24 {
                break;
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if a[[i, j]].abs() < 1e-30 {
                        continue;
                    }
                    let theta = 0.5 * (a[[j, j]] - a[[i, i]]) / a[[i, j]];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s_ = t * c;
                    for k in 0..n {
                        let aik = a[[i, k]];
                        let ajk = a[[j, k]];
                        a[[i, k]] = c * aik - s_ * ajk;
                        a[[j, k]] = s_ * aik + c * ajk;
                    }
                    for k in 0..n {
                        let aki = a[[k, i]];
                        let akj = a[[k, j]];
                        a[[k, i]] = c * aki - s_ * akj;
                        a[[k, j]] = s_ * aki + c * akj;
                    }
                }
            }
        }
        (0..n).map(|i| a[[i, i]]).collect()
    }

    #[test]
    fn projection_is_linear() {
        let s = random_matrix(12, 4, 8);
        let proj = fit_pca(&s, 2).unwrap();
        let s1 = s.row(0).to_owned();
        let s2 = s.row(1).to_owned();
        let a = 0.3;
        // affine combination (weights sum to 1) so the centering term cancels
        let combo = a * &s1 + (1.0 - a) * &s2;
        let z_combo = proj.project(&combo).unwrap();
        let z1 = proj.project(&s1).unwrap();
        let z2 = proj.project(&s2).unwrap();
        let want = a * &z1 + (1.0 - a) * &z2;
        for i in 0..2 {
            assert!((z_combo[i] - want[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn out_of_range_dimension_is_invalid() {
        let s = random_matrix(5, 3, 9);
        assert!(fit_pca(&s, 0).is_err());
        assert!(fit_pca(&s, 4).is_err());
    }

    #[test]
    fn weighted_pca_simplex_degeneracy_smoke() {
        // p+1 points at simplex-like vertices.
        let omega = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let fa = weighted_frequency_pca(&omega, 0.5).unwrap();
        let g = fa.principal_directions.t().dot(&fa.principal_directions);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-10);
            }
        }
        assert!(fa.weighted_eigenvalues[0] >= fa.weighted_eigenvalues[1]);
    }

    #[test]
    fn rejects_bad_bandwidth_and_tiny_samples() {
        let omega = random_matrix(10, 3, 10);
        assert!(weighted_frequency_pca(&omega, 0.0).is_err());
        let two = random_matrix(2, 3, 11);
        assert!(weighted_frequency_pca(&two, 1.0).is_err());
    }
}
