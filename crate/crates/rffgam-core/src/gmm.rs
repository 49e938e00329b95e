//! Gaussian mixture model over the latent coordinates, fitted with EM.

use ndarray::prelude::*;
use rand::Rng;

use crate::error::{Result, RffGamError};
use crate::linalg::cholesky_lower;
use crate::rff::sample_cumulative;
use crate::rng::{stream, Stream};

/// EM stopping controls.
#[derive(Debug, Clone, Copy)]
pub struct GmmOptions {
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    /// Hard cap on EM iterations.
    pub max_iter: usize,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Full-covariance Gaussian mixture over latent rows.
#[derive(Debug, Clone)]
pub struct GmmModel {
    /// Component weights on the probability simplex (length L).
    pub weights: Array1<f64>,
    /// Component means, one row per component (L×d).
    pub means: Array2<f64>,
    /// Full covariance matrix per component.
    pub covariances: Vec<Array2<f64>>,
    /// Total log-likelihood of the training rows at the final iterate.
    pub log_likelihood: f64,
    /// EM iterations actually performed.
    pub n_iter: usize,
    /// Whether the relative log-likelihood change dropped below tolerance.
    pub converged: bool,
}

/// Cached Cholesky factors and log-normalizers for density evaluation.
struct ComponentCache {
    chol: Vec<Array2<f64>>,
    log_norm: Vec<f64>, // −(d/2)ln 2π − Σ ln L_ii
}

fn build_cache(covariances: &[Array2<f64>]) -> Result<ComponentCache> {
    let mut chol = Vec::with_capacity(covariances.len());
    let mut log_norm = Vec::with_capacity(covariances.len());
    for (idx, sigma) in covariances.iter().enumerate() {
        let d = sigma.nrows();
        let l = cholesky_lower(sigma).map_err(|_| {
            RffGamError::numerical(format!(
                "covariance of component {idx} is not positive definite"
            ))
        })?;
        let log_det_half: f64 = (0..d).map(|i| l[[i, i]].ln()).sum();
        log_norm.push(-0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half);
        chol.push(l);
    }
    Ok(ComponentCache { chol, log_norm })
}

/// log N(z; μ, Σ) using a precomputed Cholesky factor of Σ.
fn log_gaussian(z: ArrayView1<f64>, mean: ArrayView1<f64>, l: &Array2<f64>, log_norm: f64) -> f64 {
    let d = z.len();
    // forward substitution: solve L u = (z − μ)
    let mut u = vec![0.0; d];
    for i in 0..d {
        let mut acc = z[i] - mean[i];
        for j in 0..i {
            acc -= l[[i, j]] * u[j];
        }
        u[i] = acc / l[[i, i]];
    }
    let quad: f64 = u.iter().map(|v| v * v).sum();
    log_norm - 0.5 * quad
}

/// Per-row component log-densities including log-weights: N×L.
fn weighted_log_densities(
    z: &Array2<f64>,
    weights: &Array1<f64>,
    means: &Array2<f64>,
    cache: &ComponentCache,
) -> Array2<f64> {
    let n = z.nrows();
    let l = weights.len();
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut out = Array2::zeros((n, l));
    for i in 0..n {
        for c in 0..l {
            out[[i, c]] = log_w[c]
                + log_gaussian(z.row(i), means.row(c), &cache.chol[c], cache.log_norm[c]);
        }
    }
    out
}

/// Log-sum-exp over one row.
fn lse(row: ArrayView1<f64>) -> f64 {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Add the stabilizing ridge 1e-6·trace(Σ)/d to the diagonal, in place.
fn apply_ridge(sigma: &mut Array2<f64>) {
    let d = sigma.nrows();
    let trace: f64 = (0..d).map(|i| sigma[[i, i]]).sum();
    let scale = trace / d as f64;
    // absolute floor keeps exactly-degenerate components (all points
    // coincident, e.g. a constant-target fit) factorizable
    let ridge = if scale > 0.0 { 1e-6 * scale } else { 1e-12 };
    for i in 0..d {
        sigma[[i, i]] += ridge;
    }
}

/// Covariance (MLE normalization) of a set of rows around `mean`.
fn scatter(rows: &[usize], z: &Array2<f64>, mean: ArrayView1<f64>) -> Array2<f64> {
    let d = z.ncols();
    let mut sigma = Array2::zeros((d, d));
    for &i in rows {
        let diff = &z.row(i) - &mean;
        for a in 0..d {
            for b in 0..d {
                sigma[[a, b]] += diff[a] * diff[b];
            }
        }
    }
    sigma / rows.len().max(1) as f64
}

fn global_covariance(z: &Array2<f64>) -> Array2<f64> {
    let n = z.nrows();
    let mean = z.mean_axis(Axis(0)).unwrap();
    let all: Vec<usize> = (0..n).collect();
    let mut sigma = scatter(&all, z, mean.view());
    apply_ridge(&mut sigma);
    sigma
}

/// Fit an L-component full-covariance Gaussian mixture by EM.
///
/// Initialization: k-means++ seeding of the means, nearest-seed assignment,
/// then cluster proportions for the weights and within-cluster covariances.
/// Each M-step adds a diagonal ridge of 1e-6·trace(Σ)/d before the
/// covariance is factorized. Iteration order is fixed, so results for a
/// given seed are bit-for-bit reproducible.
pub fn fit_em(z: &Array2<f64>, l: usize, seed: u64, opts: &GmmOptions) -> Result<GmmModel> {
    let (n, d) = z.dim();
    if l == 0 {
        return Err(RffGamError::invalid("need at least one mixture component"));
    }
    if n < l {
        return Err(RffGamError::invalid(format!(
            "cannot fit {l} components to {n} rows"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(RffGamError::invalid("latent matrix contains non-finite values"));
    }

    let (mut weights, mut means, mut covariances) = init_kmeans_pp(z, l, seed);

    let mut log_likelihood = f64::NEG_INFINITY;
    let mut n_iter = 0;
    let mut converged = false;

    for it in 0..opts.max_iter {
        // E-step
        let cache = build_cache(&covariances)?;
        let logp = weighted_log_densities(z, &weights, &means, &cache);
        let mut resp = Array2::zeros((n, l));
        let mut ll = 0.0;
        for i in 0..n {
            let norm = lse(logp.row(i));
            if !norm.is_finite() {
                return Err(RffGamError::numerical(
                    "log-likelihood diverged during EM",
                ));
            }
            ll += norm;
            for c in 0..l {
                resp[[i, c]] = (logp[[i, c]] - norm).exp();
            }
        }

        // M-step
        let nk = resp.sum_axis(Axis(0)); // length L
        for c in 0..l {
            if !(nk[c] > 0.0) {
                return Err(RffGamError::numerical(format!(
                    "component {c} lost all responsibility mass"
                )));
            }
        }
        weights = &nk / n as f64;
        means = resp.t().dot(z);
        for c in 0..l {
            let mut row = means.row_mut(c);
            row /= nk[c];
        }
        for c in 0..l {
            let mut sigma = Array2::zeros((d, d));
            for i in 0..n {
                let diff = &z.row(i) - &means.row(c);
                let r = resp[[i, c]];
                for a in 0..d {
                    for b in 0..d {
                        sigma[[a, b]] += r * diff[a] * diff[b];
                    }
                }
            }
            sigma /= nk[c];
            apply_ridge(&mut sigma);
            covariances[c] = sigma;
        }

        n_iter = it + 1;
        let rel = (ll - log_likelihood).abs() / log_likelihood.abs().max(f64::MIN_POSITIVE);
        let done = log_likelihood.is_finite() && rel <= opts.tol;
        log_likelihood = ll;
        if done {
            converged = true;
            break;
        }
    }

    // Refresh the stored log-likelihood so it matches the final parameters.
    let cache = build_cache(&covariances)?;
    let logp = weighted_log_densities(z, &weights, &means, &cache);
    log_likelihood = (0..n).map(|i| lse(logp.row(i))).sum();

    Ok(GmmModel {
        weights,
        means,
        covariances,
        log_likelihood,
        n_iter,
        converged,
    })
}

/// k-means++ seeding followed by a single nearest-seed assignment.
fn init_kmeans_pp(z: &Array2<f64>, l: usize, seed: u64) -> (Array1<f64>, Array2<f64>, Vec<Array2<f64>>) {
    let (n, d) = z.dim();
    let mut rng = stream(seed, Stream::GmmInit);

    let mut centers: Vec<usize> = Vec::with_capacity(l);
    centers.push(rng.random_range(0..n));
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| sq_dist(z.row(i), z.row(centers[0])))
        .collect();
    for _ in 1..l {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut cumulative = Vec::with_capacity(n);
            let mut acc = 0.0;
            for &w in &dist2 {
                acc += w;
                cumulative.push(acc);
            }
            let u: f64 = rng.random();
            sample_cumulative(&cumulative, u)
        } else {
            // all remaining distances zero (duplicate data); fall back to uniform
            rng.random_range(0..n)
        };
        centers.push(next);
        for i in 0..n {
            let d2 = sq_dist(z.row(i), z.row(next));
            if d2 < dist2[i] {
                dist2[i] = d2;
            }
        }
    }

    // Nearest-seed assignment (ties to the lowest seed index).
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); l];
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, &ci) in centers.iter().enumerate() {
            let d2 = sq_dist(z.row(i), z.row(ci));
            if d2 < best_d {
                best_d = d2;
                best = c;
            }
        }
        assigned[best].push(i);
    }

    let fallback_cov = global_covariance(z);
    let mut weights = Array1::zeros(l);
    let mut means = Array2::zeros((l, d));
    let mut covariances = Vec::with_capacity(l);
    for c in 0..l {
        let rows = &assigned[c];
        if rows.is_empty() {
            // duplicate seed rows can starve a component; give it the seed
            // point and a global covariance so EM can reassign mass
            weights[c] = 1.0 / n as f64;
            means.row_mut(c).assign(&z.row(centers[c]));
            covariances.push(fallback_cov.clone());
            continue;
        }
        weights[c] = rows.len() as f64 / n as f64;
        let mut mean = Array1::zeros(d);
        for &i in rows {
            mean += &z.row(i);
        }
        mean /= rows.len() as f64;
        means.row_mut(c).assign(&mean);
        if rows.len() < 2 {
            covariances.push(fallback_cov.clone());
        } else {
            let mut sigma = scatter(rows, z, mean.view());
            apply_ridge(&mut sigma);
            // a cluster of identical points still has zero trace; borrow the
            // global shape so the first E-step is well-defined
            if (0..d).map(|i| sigma[[i, i]]).sum::<f64>() <= 0.0 {
                covariances.push(fallback_cov.clone());
            } else {
                covariances.push(sigma);
            }
        }
    }
    let total = weights.sum();
    weights /= total;
    (weights, means, covariances)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.means.ncols()
    }

    /// Posterior component probabilities for each row; rows sum to one.
    pub fn responsibilities(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.latent_dim() {
            return Err(RffGamError::invalid(format!(
                "expected {} latent columns, got {}",
                self.latent_dim(),
                z.ncols()
            )));
        }
        let cache = build_cache(&self.covariances)?;
        let logp = weighted_log_densities(z, &self.weights, &self.means, &cache);
        let n = z.nrows();
        let l = self.n_components();
        let mut resp = Array2::zeros((n, l));
        for i in 0..n {
            let norm = lse(logp.row(i));
            if !norm.is_finite() {
                return Err(RffGamError::numerical(
                    "responsibility normalization underflowed",
                ));
            }
            for c in 0..l {
                resp[[i, c]] = (logp[[i, c]] - norm).exp();
            }
        }
        Ok(resp)
    }

    /// Mixture log-density of each latent row.
    pub fn log_density(&self, z: &Array2<f64>) -> Result<Array1<f64>> {
        let cache = build_cache(&self.covariances)?;
        let logp = weighted_log_densities(z, &self.weights, &self.means, &cache);
        Ok(Array1::from_iter((0..z.nrows()).map(|i| lse(logp.row(i)))))
    }

    /// Keep only the flagged components, renormalizing their weights.
    /// The stored log-likelihood refers to the pre-drop fit; callers that
    /// care should refresh it against their data.
    pub fn retain_components(&self, keep: &[bool]) -> Result<GmmModel> {
        if keep.len() != self.n_components() {
            return Err(RffGamError::invalid("keep mask length mismatch"));
        }
        let kept: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        if kept.is_empty() {
            return Err(RffGamError::invalid("cannot drop every mixture component"));
        }
        let total: f64 = kept.iter().map(|&i| self.weights[i]).sum();
        if !(total > 0.0) {
            return Err(RffGamError::numerical(
                "surviving components carry no weight",
            ));
        }
        let d = self.latent_dim();
        let mut weights = Array1::zeros(kept.len());
        let mut means = Array2::zeros((kept.len(), d));
        let mut covariances = Vec::with_capacity(kept.len());
        for (new_i, &old_i) in kept.iter().enumerate() {
            weights[new_i] = self.weights[old_i] / total;
            means.row_mut(new_i).assign(&self.means.row(old_i));
            covariances.push(self.covariances[old_i].clone());
        }
        Ok(GmmModel {
            weights,
            means,
            covariances,
            log_likelihood: self.log_likelihood,
            n_iter: self.n_iter,
            converged: self.converged,
        })
    }

    /// Most responsible component per row; ties resolve to the lowest index.
    pub fn hard_assign(&self, z: &Array2<f64>) -> Result<Vec<usize>> {
        let resp = self.responsibilities(z)?;
        Ok(resp
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                let mut best_v = row[0];
                for (c, &v) in row.iter().enumerate().skip(1) {
                    if v > best_v {
                        best_v = v;
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}
