//! Random Fourier feature regression with frequency resampling.
//!
//! The model is m(x) = y_mean + Re(Σ_k β_k e^{i ω_k·x}) on standardized
//! inputs, with ω drawn from the spectral density of a Gaussian RBF kernel
//! of bandwidth σ (a zero-mean Gaussian with covariance σ⁻²·I) and β solving
//! a Tikhonov-regularized least-squares problem.

use ndarray::prelude::*;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, RffGamError};
use crate::linalg::{cholesky_lower, gram_lower, gram_rows_lower, solve_spd, solve_spd_into};
use crate::rng::{stream, Stream};
use crate::standardize::Standardizer;

/// Row block size for chunked prediction paths (keeps the transient complex
/// design matrix small when scoring very tall inputs).
const PREDICT_BLOCK_ROWS: usize = 8192;

/// How the resampled frequencies are perturbed between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterKind {
    /// Independent per-coordinate Gaussian steps of standard deviation δ.
    Fixed,
    /// Steps δ·N(0, C + 1e-3·I), where C is a running average of the
    /// empirical covariance of the resampled frequency rows. The walk adapts
    /// to the covariance structure the selection weights concentrate on,
    /// which anneals the step size along uninformative directions.
    Covariance,
}

impl Default for JitterKind {
    fn default() -> Self {
        JitterKind::Fixed
    }
}

impl JitterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            JitterKind::Fixed => "fixed",
            JitterKind::Covariance => "covariance",
        }
    }
}

impl std::str::FromStr for JitterKind {
    type Err = RffGamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(JitterKind::Fixed),
            "covariance" => Ok(JitterKind::Covariance),
            other => Err(RffGamError::Config(format!(
                "unknown jitter kind '{other}' (expected fixed or covariance)"
            ))),
        }
    }
}

/// Parameters of the frequency-resampling search.
#[derive(Debug, Clone)]
pub struct ResampleParams {
    /// Number of Fourier features K.
    pub k: usize,
    /// Kernel bandwidth σ of the initial spectral draw.
    pub sigma: f64,
    /// Tikhonov parameter per fit row; the solve uses λ·n_fit.
    pub lambda: f64,
    /// Random-walk step size δ.
    pub delta: f64,
    /// Number of resampling iterations (0 = keep the initial draw).
    pub iters: usize,
    /// Jitter flavor; `Fixed` is the documented baseline procedure.
    pub jitter: JitterKind,
    /// Base seed; the initial draw and the walk use separate derived streams.
    pub seed: u64,
}

/// A fitted random Fourier feature regressor.
#[derive(Debug, Clone)]
pub struct RffModel {
    /// K×p frequency matrix (one frequency per row).
    pub omega: Array2<f64>,
    /// Complex coefficient vector of length K.
    pub beta: Array1<Complex64>,
    /// Kernel bandwidth used for the initial draw.
    pub sigma: f64,
    /// Tikhonov parameter per fit row.
    pub lambda: f64,
    /// Input standardizer (training statistics).
    pub standardizer: Standardizer,
    /// Response centering offset.
    pub y_mean: f64,
}

/// Draw K frequency rows i.i.d. from N(0, σ⁻²·I_p).
pub fn sample_frequencies(p: usize, k: usize, sigma: f64, seed: u64) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(RffGamError::invalid("K must be at least 1"));
    }
    if p == 0 {
        return Err(RffGamError::invalid("input dimension must be at least 1"));
    }
    if !(sigma > 0.0) {
        return Err(RffGamError::invalid("sigma must be positive"));
    }
    let mut rng = stream(seed, Stream::FrequencySample);
    let mut omega = Array2::zeros((k, p));
    for v in omega.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = z / sigma;
    }
    Ok(omega)
}

/// Build the complex design matrix Φ with Φ_ik = exp(i·ω_k·x_i).
///
/// `x` must already be standardized.
pub fn build_design_matrix(x: &Array2<f64>, omega: &Array2<f64>) -> Result<Array2<Complex64>> {
    if x.ncols() != omega.ncols() {
        return Err(RffGamError::invalid(format!(
            "X has {} columns but omega has {}",
            x.ncols(),
            omega.ncols()
        )));
    }
    // Angles A = X ωᵀ via BLAS, then unit phases.
    let angles = x.dot(&omega.t());
    let mut phi = Array2::zeros(angles.dim());
    azip_phases(&angles, &mut phi);
    Ok(phi)
}

fn azip_phases(angles: &Array2<f64>, phi: &mut Array2<Complex64>) {
    ndarray::Zip::from(phi).and(angles).for_each(|q, &a| {
        let (s, c) = a.sin_cos();
        *q = Complex64::new(c, s);
    });
}

/// Build the stacked real trigonometric design W = [cos(XΩᵀ) | sin(XΩᵀ)].
///
/// Column k holds cos(ω_k·x_i) and column K+k holds sin(ω_k·x_i), so the
/// complex design is Φ = W[:, :K] + i·W[:, K:]. Training goes through this
/// representation because the heavy Gram products then run on the real BLAS
/// kernels, which are several times faster than their complex counterparts.
pub fn build_trig_design(x: &Array2<f64>, omega: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != omega.ncols() {
        return Err(RffGamError::invalid(format!(
            "X has {} columns but omega has {}",
            x.ncols(),
            omega.ncols()
        )));
    }
    let angles = x.dot(&omega.t());
    let (n, k) = angles.dim();
    let mut w = Array2::zeros((n, 2 * k));
    let ws = w.as_slice_mut().unwrap();
    for (i, arow) in angles.rows().into_iter().enumerate() {
        let base = i * 2 * k;
        for (j, &a) in arow.iter().enumerate() {
            let (s, c) = a.sin_cos();
            ws[base + j] = c;
            ws[base + k + j] = s;
        }
    }
    Ok(w)
}

/// Solve (Φᴴ Φ + λ I_K) β = Φᴴ y with a Hermitian positive-definite solve.
///
/// Accepts the complex design for callers that already hold one; internally
/// the system is rearranged into real block form and handed to
/// [`fit_coefficients_stacked`].
pub fn fit_coefficients(
    phi: &Array2<Complex64>,
    y: &Array1<f64>,
    lambda: f64,
) -> Result<Array1<Complex64>> {
    let (n, k) = phi.dim();
    let mut w = Array2::zeros((n, 2 * k));
    for (i, row) in phi.rows().into_iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            w[[i, j]] = z.re;
            w[[i, k + j]] = z.im;
        }
    }
    fit_coefficients_stacked(&w, y, lambda)
}

/// Solve (Φᴴ Φ + λ I_K) β = Φᴴ y for the design encoded by the stacked real
/// matrix `w` = [C | S] (so Φ = C + iS), entirely in real arithmetic.
///
/// The Hermitian matrix H = G̃ + iA (G̃ = CᵀC + SᵀS + λI symmetric,
/// A = CᵀS − SᵀC antisymmetric) embeds as the symmetric positive-definite
/// real block system
///
/// ```text
///   [ G̃  −A ] [Re β]   [ Re Φᴴy ]
///   [ A   G̃ ] [Im β] = [ Im Φᴴy ]
/// ```
///
/// solved with one real rank-k update and one real Cholesky. When the row
/// count is below K the equivalent dual system (ΦΦᴴ + λI_n)α = y with
/// β = Φᴴα is solved instead, keeping the factorization at the smaller of
/// the two dimensions.
pub fn fit_coefficients_stacked(
    w: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
) -> Result<Array1<Complex64>> {
    let (n, two_k) = w.dim();
    if n == 0 {
        return Err(RffGamError::invalid("empty design matrix"));
    }
    if two_k == 0 || two_k % 2 != 0 {
        return Err(RffGamError::invalid(
            "stacked design must have an even, positive number of columns",
        ));
    }
    let k = two_k / 2;
    if y.len() != n {
        return Err(RffGamError::invalid(format!(
            "design matrix has {n} rows but y has {}",
            y.len()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(RffGamError::invalid("lambda must be positive and finite"));
    }
    // A non-finite entry anywhere makes the (bounded-entry) sums non-finite,
    // so this catches NaN/inf without a per-entry branch.
    if !w.sum().is_finite() {
        return Err(RffGamError::invalid("non-finite value in design matrix"));
    }
    if !y.sum().is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(RffGamError::invalid("non-finite value in response"));
    }
    if n >= k {
        fit_stacked_primal(w, y, lambda, k)
    } else {
        fit_stacked_dual(w, y, lambda, k)
    }
}

fn fit_stacked_primal(
    w: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    k: usize,
) -> Result<Array1<Complex64>> {
    // Lower triangle of WᵀW holds every block needed: CᵀC and SᵀS lower
    // triangles on the block diagonal, and the full SᵀC block below it
    // (CᵀS is its transpose).
    let g2 = gram_lower(w);
    let wty = w.t().dot(y);
    let mut bmat = Array2::<f64>::zeros((2 * k, 2 * k));
    for i in 0..k {
        for j in 0..=i {
            let mut gt = g2[[i, j]] + g2[[k + i, k + j]];
            if i == j {
                gt += lambda;
            }
            bmat[[i, j]] = gt;
            bmat[[k + i, k + j]] = gt;
        }
        for j in 0..k {
            // A = CᵀS − SᵀC with CᵀS[i,j] = SᵀC[j,i]; both reads stay in
            // the computed lower triangle of g2.
            bmat[[k + i, j]] = g2[[k + j, i]] - g2[[k + i, j]];
        }
    }
    drop(g2);
    let mut rhs = Array1::zeros(2 * k);
    for i in 0..k {
        // Φᴴy = Cᵀy − i·Sᵀy.
        rhs[i] = wty[i];
        rhs[k + i] = -wty[k + i];
    }
    let sol = solve_spd_into(bmat, &rhs)?;
    Ok(Array1::from_shape_fn(k, |i| {
        Complex64::new(sol[i], sol[k + i])
    }))
}

fn fit_stacked_dual(
    w: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    k: usize,
) -> Result<Array1<Complex64>> {
    let n = w.nrows();
    let c = w.slice(s![.., ..k]);
    let s_half = w.slice(s![.., k..]);
    // ΦΦᴴ = (CCᵀ + SSᵀ) + i(SCᵀ − CSᵀ); the real part is the row Gram of W.
    let r = gram_rows_lower(w);
    let sc = s_half.dot(&c.t());
    let mut bmat = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..=i {
            let mut gt = r[[i, j]];
            if i == j {
                gt += lambda;
            }
            bmat[[i, j]] = gt;
            bmat[[n + i, n + j]] = gt;
        }
        for j in 0..n {
            bmat[[n + i, j]] = sc[[i, j]] - sc[[j, i]];
        }
    }
    drop(r);
    drop(sc);
    let mut rhs = Array1::zeros(2 * n);
    rhs.slice_mut(s![..n]).assign(y);
    let sol = solve_spd_into(bmat, &rhs)?;
    let ar = sol.slice(s![..n]);
    let ai = sol.slice(s![n..]);
    // β = Φᴴα = (Cᵀ − iSᵀ)(α_R + iα_I)
    //   → Re β = Cᵀα_R + Sᵀα_I, Im β = Cᵀα_I − Sᵀα_R.
    let cr = c.t().dot(&ar);
    let sr = s_half.t().dot(&ar);
    let ci = c.t().dot(&ai);
    let si = s_half.t().dot(&ai);
    Ok(Array1::from_shape_fn(k, |j| {
        Complex64::new(cr[j] + si[j], ci[j] - sr[j])
    }))
}

impl RffModel {
    /// Predict responses for raw (unstandardized) inputs.
    pub fn predict(&self, x_raw: &Array2<f64>) -> Result<Array1<f64>> {
        let xs = self.standardizer.transform(x_raw)?;
        self.predict_standardized(&xs)
    }

    /// Predict responses for inputs that are already standardized.
    pub fn predict_standardized(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.omega.ncols() {
            return Err(RffGamError::invalid(format!(
                "model expects {} features, got {}",
                self.omega.ncols(),
                x.ncols()
            )));
        }
        let n = x.nrows();
        let mut out = Array1::zeros(n);
        let beta_col = self.beta.view().insert_axis(Axis(1));
        let mut start = 0;
        while start < n {
            let end = (start + PREDICT_BLOCK_ROWS).min(n);
            let block = x.slice(s![start..end, ..]);
            let angles = block.dot(&self.omega.t());
            let mut phi = Array2::zeros(angles.dim());
            azip_phases(&angles, &mut phi);
            let z = phi.dot(&beta_col);
            for (i, row) in z.rows().into_iter().enumerate() {
                out[start + i] = self.y_mean + row[0].re;
            }
            start = end;
        }
        Ok(out)
    }

    /// Intermediate feature matrix S with S_ik = Re(β_k · e^{i ω_k·x_i}),
    /// computed on standardized inputs.
    pub fn intermediate_features(&self, x_raw: &Array2<f64>) -> Result<Array2<f64>> {
        let xs = self.standardizer.transform(x_raw)?;
        self.intermediate_features_standardized(&xs)
    }

    /// As [`intermediate_features`](Self::intermediate_features) for inputs
    /// already standardized.
    pub fn intermediate_features_standardized(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.omega.ncols() {
            return Err(RffGamError::invalid(format!(
                "model expects {} features, got {}",
                self.omega.ncols(),
                x.ncols()
            )));
        }
        let (n, k) = (x.nrows(), self.omega.nrows());
        let mut s = Array2::zeros((n, k));
        let mut start = 0;
        while start < n {
            let end = (start + PREDICT_BLOCK_ROWS).min(n);
            let block = x.slice(s![start..end, ..]);
            let angles = block.dot(&self.omega.t());
            let mut target = s.slice_mut(s![start..end, ..]);
            ndarray::Zip::from(&mut target)
                .and(&angles)
                .and_broadcast(self.beta.view().insert_axis(Axis(0)))
                .for_each(|out, &a, &b| {
                    let (sin_a, cos_a) = a.sin_cos();
                    // Re(β · e^{ia}) = Re(β)·cos a − Im(β)·sin a
                    *out = b.re * cos_a - b.im * sin_a;
                });
            start = end;
        }
        Ok(s)
    }

    /// Refit β (and the centering offset) on new data at the stored
    /// frequencies. Used by the training pipeline to re-estimate the
    /// coefficients on the complete training set once the frequency search
    /// has settled on ω.
    pub fn refit(&mut self, x_std: &Array2<f64>, y: &Array1<f64>) -> Result<()> {
        let y_mean = y.sum() / y.len() as f64;
        let yc = y.mapv(|v| v - y_mean);
        let w = build_trig_design(x_std, &self.omega)?;
        let lambda_eff = self.lambda * x_std.nrows() as f64;
        self.beta = fit_coefficients_stacked(&w, &yc, lambda_eff)?;
        self.y_mean = y_mean;
        Ok(())
    }
}

fn rmse(pred: &Array1<f64>, truth: &Array1<f64>) -> f64 {
    let n = truth.len() as f64;
    let sq: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (sq / n).sqrt()
}

/// Draw an index in [0, cumulative.len()) with probability proportional to
/// the (non-negative) weight increments encoded in `cumulative`.
pub(crate) fn sample_cumulative(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap();
    let target = u * total;
    // First index whose cumulative weight exceeds the target; skips
    // zero-weight entries even when the target lands exactly on a boundary.
    cumulative
        .partition_point(|&c| c <= target)
        .min(cumulative.len() - 1)
}

/// Iteratively refine the frequency sample on a fit/validation split.
///
/// Each iteration fits β on the current frequencies, resamples the K
/// frequency rows with probability proportional to |β_k|², perturbs the
/// resampled rows by a Gaussian random walk, and refits. The iterate with
/// the lowest validation RMSE (including the initial draw) is returned;
/// `iters = 0` returns the fit on the initial Gaussian draw unchanged.
///
/// `x_fit` / `x_val` must already be standardized with `standardizer`.
/// `params.lambda` is quoted per fit row: the Tikhonov solve uses
/// λ·n_fit, keeping configured values comparable across differently sized
/// fit sets.
pub fn resample_frequencies(
    x_fit: &Array2<f64>,
    y_fit: &Array1<f64>,
    x_val: &Array2<f64>,
    y_val: &Array1<f64>,
    standardizer: &Standardizer,
    params: &ResampleParams,
) -> Result<RffModel> {
    if x_val.nrows() == 0 {
        return Err(RffGamError::invalid("validation split must be non-empty"));
    }
    if x_fit.nrows() == 0 {
        return Err(RffGamError::invalid("fit split must be non-empty"));
    }
    if !(params.delta > 0.0) {
        return Err(RffGamError::invalid("delta must be positive"));
    }
    let p = x_fit.ncols();
    let k = params.k;
    let n_fit = x_fit.nrows();
    let lambda_eff = params.lambda * n_fit as f64;
    let y_mean = y_fit.sum() / n_fit as f64;
    let yc = y_fit.mapv(|v| v - y_mean);

    let mut omega = sample_frequencies(p, k, params.sigma, params.seed)?;
    let mut walk_rng = stream(params.seed, Stream::FrequencyWalk);

    // Running covariance estimate for the covariance-guided walk.
    let mut cov_run = Array2::<f64>::eye(p);

    let mut best: Option<(f64, Array2<f64>, Array1<Complex64>)> = None;
    for it in 0..=params.iters {
        let w = build_trig_design(x_fit, &omega)?;
        let beta = fit_coefficients_stacked(&w, &yc, lambda_eff)?;
        drop(w);
        let candidate = RffModel {
            omega: omega.clone(),
            beta: beta.clone(),
            sigma: params.sigma,
            lambda: params.lambda,
            standardizer: standardizer.clone(),
            y_mean,
        };
        let val_rmse = rmse(&candidate.predict_standardized(x_val)?, y_val);
        if best.as_ref().is_none_or(|(b, _, _)| val_rmse < *b) {
            best = Some((val_rmse, omega.clone(), beta.clone()));
        }
        if it == params.iters {
            break;
        }

        // Selection weights ∝ |β_k|²; degenerate weights fall back to uniform.
        let mut cumulative = Vec::with_capacity(k);
        let mut acc = 0.0;
        for b in beta.iter() {
            acc += b.norm_sqr();
            cumulative.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            cumulative.clear();
            for i in 0..k {
                cumulative.push((i + 1) as f64);
            }
        }
        let mut resampled = Array2::zeros((k, p));
        for r in 0..k {
            let u: f64 = walk_rng.random();
            let idx = sample_cumulative(&cumulative, u);
            resampled.row_mut(r).assign(&omega.row(idx));
        }

        match params.jitter {
            JitterKind::Fixed => {
                for v in resampled.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut walk_rng);
                    *v += params.delta * z;
                }
                omega = resampled;
            }
            JitterKind::Covariance => {
                let mean = resampled.mean_axis(Axis(0)).unwrap();
                let centered = &resampled - &mean.view().insert_axis(Axis(0));
                let emp = centered.t().dot(&centered) / (k as f64 - 1.0);
                cov_run = (&cov_run * it as f64 + &emp) / (it as f64 + 1.0);
                let mut shifted = cov_run.clone();
                for i in 0..p {
                    shifted[[i, i]] += 1e-3;
                }
                let chol = cholesky_lower(&shifted)?;
                let mut z = Array2::zeros((k, p));
                for v in z.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut walk_rng);
                    *v = g;
                }
                omega = resampled + params.delta * z.dot(&chol.t());
            }
        }
    }

    let (_, omega_best, beta_best) = best.unwrap();
    Ok(RffModel {
        omega: omega_best,
        beta: beta_best,
        sigma: params.sigma,
        lambda: params.lambda,
        standardizer: standardizer.clone(),
        y_mean,
    })
}

/// Gaussian RBF kernel matrix κ_σ(x_i − x_j) = exp(−‖x_i−x_j‖²/(2σ²)).
pub fn rbf_kernel_matrix(a: &Array2<f64>, b: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut k = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let d2: f64 = a
                .row(i)
                .iter()
                .zip(b.row(j).iter())
                .map(|(u, v)| (u - v) * (u - v))
                .sum();
            k[[i, j]] = (-d2 / (2.0 * sigma * sigma)).exp();
        }
    }
    k
}

/// Dense Gaussian kernel ridge regressor, used as a small-N reference
/// predictor: solves (Ξ + λ I) η = y and evaluates Σ_i η_i κ_σ(x − x_i).
///
/// For comparisons against the feature-map model note the scaling: a
/// Tikhonov parameter Λ on the K-feature solve corresponds to λ = Λ/K here,
/// because the feature Gram matrix approximates K·Ξ.
#[derive(Debug, Clone)]
pub struct KernelRidgePredictor {
    x_train: Array2<f64>,
    eta: Array1<f64>,
    sigma: f64,
}

pub fn kernel_ridge_oracle(
    x: &Array2<f64>,
    y: &Array1<f64>,
    sigma: f64,
    lambda: f64,
) -> Result<KernelRidgePredictor> {
    let n = x.nrows();
    if y.len() != n {
        return Err(RffGamError::invalid("x/y row mismatch"));
    }
    let mut k = rbf_kernel_matrix(x, x, sigma);
    for i in 0..n {
        k[[i, i]] += lambda;
    }
    let eta = solve_spd(&k, y)?;
    Ok(KernelRidgePredictor {
        x_train: x.to_owned(),
        eta,
        sigma,
    })
}

impl KernelRidgePredictor {
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        let k = rbf_kernel_matrix(x, &self.x_train, self.sigma);
        k.dot(&self.eta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::conj_gram;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn tiny_standardizer(p: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; p],
            std: vec![1.0; p],
        }
    }

    #[test]
    fn sample_frequencies_shape_and_determinism() {
        let a = sample_frequencies(8, 400, 1.0, 7).unwrap();
        let b = sample_frequencies(8, 400, 1.0, 7).unwrap();
        assert_eq!(a.shape(), &[400, 8]);
        assert_eq!(a, b);
        let c = sample_frequencies(8, 400, 1.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn huge_sigma_shrinks_frequencies() {
        let a = sample_frequencies(3, 100, 1e6, 11).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn frequency_variance_matches_spectral_density() {
        // Monte Carlo check of the per-coordinate variance of N(0, σ⁻²).
        let a = sample_frequencies(2, 50000, 1.0, 13).unwrap();
        for j in 0..2 {
            let col = a.column(j);
            let m = col.sum() / col.len() as f64;
            let var: f64 =
                col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (col.len() - 1) as f64;
            assert!((0.98..=1.02).contains(&var), "var {var}");
        }
    }

    #[test]
    fn design_matrix_zero_inputs_give_ones() {
        let x = Array2::zeros((3, 2));
        let omega = array![[1.0, -2.0], [0.5, 0.25]];
        let phi = build_design_matrix(&x, &omega).unwrap();
        for z in phi.iter() {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn design_matrix_unit_modulus_and_scalar_oracle() {
        let x = array![
            [0.3, -1.2, 0.8],
            [1.1, 0.4, -0.6],
            [-0.9, 2.2, 0.1],
            [0.0, -0.5, 1.7]
        ];
        let omega = array![[1.3, 0.2, -0.7], [-0.4, 1.9, 0.6], [2.2, -1.1, 0.3]];
        let phi = build_design_matrix(&x, &omega).unwrap();
        for i in 0..4 {
            for kk in 0..3 {
                let angle: f64 = x.row(i).dot(&omega.row(kk));
                let want = Complex64::new(angle.cos(), angle.sin());
                assert!((phi[[i, kk]] - want).norm() < 1e-14);
                assert!((phi[[i, kk]].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stacked_design_halves_match_complex_design() {
        let mut rng = stream(61, Stream::FrequencySample);
        let x = Array2::from_shape_fn((7, 3), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let omega = sample_frequencies(3, 5, 0.9, 62).unwrap();
        let phi = build_design_matrix(&x, &omega).unwrap();
        let w = build_trig_design(&x, &omega).unwrap();
        assert_eq!(w.dim(), (7, 10));
        for i in 0..7 {
            for j in 0..5 {
                // Same angles, same sin_cos evaluations: bitwise equal.
                assert_eq!(w[[i, j]], phi[[i, j]].re);
                assert_eq!(w[[i, 5 + j]], phi[[i, j]].im);
            }
        }
    }

    #[test]
    fn primal_and_dual_solves_agree() {
        // n = 12 < K = 16 routes the public path through the dual system;
        // run the primal on the same stacked design and compare solutions.
        let mut rng = stream(63, Stream::FrequencySample);
        let x = Array2::from_shape_fn((12, 3), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let y = Array1::from_shape_fn(12, |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let omega = sample_frequencies(3, 16, 1.0, 64).unwrap();
        let w = build_trig_design(&x, &omega).unwrap();
        let dual = fit_coefficients_stacked(&w, &y, 0.8).unwrap();
        let primal = fit_stacked_primal(&w, &y, 0.8, 16).unwrap();
        let num: f64 = dual
            .iter()
            .zip(primal.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = primal.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-10, "relative gap {}", num / den);
    }

    #[test]
    fn complex_entry_fit_matches_stacked_fit() {
        // The complex-facing wrapper must agree with the stacked solver it
        // delegates to, including for designs that are not unit-modulus
        // phase matrices.
        let mut rng = stream(66, Stream::FrequencyWalk);
        let phi = Array2::from_shape_fn((9, 4), |_| {
            Complex64::new(
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
            )
        });
        let y = Array1::from_shape_fn(9, |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let beta = fit_coefficients(&phi, &y, 0.4).unwrap();
        let mut w = Array2::zeros((9, 8));
        for i in 0..9 {
            for j in 0..4 {
                w[[i, j]] = phi[[i, j]].re;
                w[[i, 4 + j]] = phi[[i, j]].im;
            }
        }
        let beta_stacked = fit_coefficients_stacked(&w, &y, 0.4).unwrap();
        for (a, b) in beta.iter().zip(beta_stacked.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fit_zero_response_gives_zero_beta() {
        let x = array![[0.1, 0.2], [0.7, -0.3], [0.5, 0.9]];
        let omega = sample_frequencies(2, 4, 1.0, 3).unwrap();
        let phi = build_design_matrix(&x, &omega).unwrap();
        let beta = fit_coefficients(&phi, &Array1::zeros(3), 0.5).unwrap();
        assert!(beta.iter().all(|b| b.norm() < 1e-14));
    }

    #[test]
    fn fit_matches_dense_inverse_oracle() {
        // N=10, K=5 random instance vs an explicit dense inverse.
        let mut rng = stream(21, Stream::FrequencySample);
        let x = Array2::from_shape_fn((10, 3), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let y = Array1::from_shape_fn(10, |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let omega = sample_frequencies(3, 5, 1.0, 22).unwrap();
        let phi = build_design_matrix(&x, &omega).unwrap();
        let lambda = 0.37;
        let beta = fit_coefficients(&phi, &y, lambda).unwrap();

        // Oracle: invert (ΦᴴΦ + λI) by solving against identity columns
        // with naive Gaussian elimination on the 5×5 complex system.
        let k = 5;
        let mut lhs = Array2::<Complex64>::zeros((k, k));
        for a in 0..k {
            for b in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..10 {
                    acc += phi[[i, a]].conj() * phi[[i, b]];
                }
                lhs[[a, b]] = acc;
            }
            lhs[[a, a]] += Complex64::new(lambda, 0.0);
        }
        let mut rhs = Array1::<Complex64>::zeros(k);
        for a in 0..k {
            for i in 0..10 {
                rhs[a] += phi[[i, a]].conj() * Complex64::new(y[i], 0.0);
            }
        }
        // Gaussian elimination with partial pivoting.
        let mut aug = lhs.clone();
        let mut b = rhs.clone();
        for col in 0..k {
            let mut piv = col;
            for r in (col + 1)..k {
                if aug[[r, col]].norm() > aug[[piv, col]].norm() {
                    piv = r;
                }
            }
            if piv != col {
                for c in 0..k {
                    let tmp = aug[[col, c]];
                    aug[[col, c]] = aug[[piv, c]];
                    aug[[piv, c]] = tmp;
                }
                let tmp = b[col];
                b[col] = b[piv];
                b[piv] = tmp;
            }
            for r in (col + 1)..k {
                let f = aug[[r, col]] / aug[[col, col]];
                for c in col..k {
                    let v = aug[[col, c]];
                    aug[[r, c]] -= f * v;
                }
                let bc = b[col];
                b[r] -= f * bc;
            }
        }
        let mut beta_oracle = Array1::<Complex64>::zeros(k);
        for r in (0..k).rev() {
            let mut acc = b[r];
            for c in (r + 1)..k {
                acc -= aug[[r, c]] * beta_oracle[c];
            }
            beta_oracle[r] = acc / aug[[r, r]];
        }

        let num: f64 = beta
            .iter()
            .zip(beta_oracle.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = beta_oracle.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-8, "relative deviation {}", num / den);
    }

    #[test]
    fn fit_residual_small() {
        let mut rng = stream(31, Stream::FrequencySample);
        let x = Array2::from_shape_fn((40, 2), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let y = Array1::from_shape_fn(40, |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let omega = sample_frequencies(2, 30, 1.0, 5).unwrap();
        let phi = build_design_matrix(&x, &omega).unwrap();
        let lambda = 2.0;
        let beta = fit_coefficients(&phi, &y, lambda).unwrap();
        // residual = (ΦᴴΦ+λI)β − Φᴴy
        let gram = conj_gram(&phi);
        let yc = y.mapv(|v| Complex64::new(v, 0.0));
        let rhs = phi
            .t()
            .mapv(|z| z.conj())
            .dot(&yc.view().insert_axis(Axis(1)))
            .remove_axis(Axis(1));
        let mut lhs_beta = gram.dot(&beta.view().insert_axis(Axis(1))).remove_axis(Axis(1));
        for (lb, bb) in lhs_beta.iter_mut().zip(beta.iter()) {
            *lb += Complex64::new(lambda, 0.0) * bb;
        }
        let num: f64 = lhs_beta
            .iter()
            .zip(rhs.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den <= 1e-8, "relative residual {}", num / den);
    }

    #[test]
    fn enormous_lambda_crushes_beta() {
        let x = array![[0.5, -0.5], [0.25, 1.0], [-0.75, 0.1]];
        let y = array![1.0, -1.0, 0.5];
        let omega = sample_frequencies(2, 6, 1.0, 9).unwrap();
        let phi = build_design_matrix(&x, &omega).unwrap();
        let lambda = 1e9;
        let beta = fit_coefficients(&phi, &y, lambda).unwrap();
        let yc = y.mapv(|v| Complex64::new(v, 0.0));
        let rhs = phi
            .t()
            .mapv(|z| z.conj())
            .dot(&yc.view().insert_axis(Axis(1)))
            .remove_axis(Axis(1));
        let beta_norm: f64 = beta.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        let rhs_norm: f64 = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(beta_norm <= rhs_norm / 1e9 * (1.0 + 1e-6));
    }

    #[test]
    fn predict_with_zero_beta_is_constant() {
        let model = RffModel {
            omega: sample_frequencies(2, 5, 1.0, 1).unwrap(),
            beta: Array1::zeros(5),
            sigma: 1.0,
            lambda: 0.1,
            standardizer: tiny_standardizer(2),
            y_mean: 3.25,
        };
        let x = array![[0.4, -0.2], [1.5, 2.5]];
        let pred = model.predict(&x).unwrap();
        assert!(pred.iter().all(|v| (v - 3.25).abs() < 1e-15));
    }

    #[test]
    fn predict_matches_scalar_loop() {
        let omega = sample_frequencies(2, 7, 0.8, 17).unwrap();
        let mut rng = stream(18, Stream::FrequencyWalk);
        let beta = Array1::from_shape_fn(7, |_| {
            Complex64::new(
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
            )
        });
        let model = RffModel {
            omega: omega.clone(),
            beta: beta.clone(),
            sigma: 0.8,
            lambda: 0.1,
            standardizer: tiny_standardizer(2),
            y_mean: -1.5,
        };
        let x = array![[0.3, 0.9], [-0.7, 0.2], [1.4, -2.2]];
        let pred = model.predict(&x).unwrap();
        for i in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for kk in 0..7 {
                let angle: f64 = x.row(i).dot(&omega.row(kk));
                acc += beta[kk] * Complex64::new(angle.cos(), angle.sin());
            }
            assert!((pred[i] - (-1.5 + acc.re)).abs() < 1e-12);
        }
    }

    #[test]
    fn intermediate_features_row_sums_match_prediction() {
        let omega = sample_frequencies(3, 20, 1.0, 4).unwrap();
        let mut rng = stream(44, Stream::FrequencyWalk);
        let beta = Array1::from_shape_fn(20, |_| {
            Complex64::new(
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
            )
        });
        let model = RffModel {
            omega,
            beta,
            sigma: 1.0,
            lambda: 0.1,
            standardizer: tiny_standardizer(3),
            y_mean: 0.7,
        };
        let x = Array2::from_shape_fn((9, 3), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let s = model.intermediate_features(&x).unwrap();
        let pred = model.predict(&x).unwrap();
        for i in 0..9 {
            let row_sum: f64 = s.row(i).sum();
            assert!((row_sum - (pred[i] - 0.7)).abs() < 1e-10);
        }
    }

    #[test]
    fn intermediate_features_all_ones_case() {
        let model = RffModel {
            omega: sample_frequencies(2, 6, 1.0, 2).unwrap(),
            beta: Array1::from_elem(6, Complex64::new(1.0, 0.0)),
            sigma: 1.0,
            lambda: 0.1,
            standardizer: tiny_standardizer(2),
            y_mean: 0.0,
        };
        let x = Array2::zeros((4, 2));
        let s = model.intermediate_features(&x).unwrap();
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn intermediate_features_scalar_oracle() {
        let omega = array![[0.5, -1.5], [2.0, 0.3]];
        let beta = Array1::from_vec(vec![
            Complex64::new(0.7, -0.4),
            Complex64::new(-1.1, 0.9),
        ]);
        let model = RffModel {
            omega: omega.clone(),
            beta: beta.clone(),
            sigma: 1.0,
            lambda: 0.1,
            standardizer: tiny_standardizer(2),
            y_mean: 0.0,
        };
        let x = array![[0.2, 0.6], [-0.9, 1.3]];
        let s = model.intermediate_features(&x).unwrap();
        for i in 0..2 {
            for kk in 0..2 {
                let angle: f64 = x.row(i).dot(&omega.row(kk));
                let want = (beta[kk] * Complex64::new(angle.cos(), angle.sin())).re;
                assert!((s[[i, kk]] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn resample_zero_iters_returns_initial_draw() {
        let mut rng = stream(77, Stream::FrequencyWalk);
        let x = Array2::from_shape_fn((60, 2), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let y = x.column(0).mapv(|v| (3.0 * v).sin());
        let st = tiny_standardizer(2);
        let params = ResampleParams {
            k: 20,
            sigma: 1.0,
            lambda: 0.01,
            delta: 0.3,
            iters: 0,
            jitter: JitterKind::Fixed,
            seed: 55,
        };
        let model = resample_frequencies(
            &x.slice(s![..50, ..]).to_owned(),
            &y.slice(s![..50]).to_owned(),
            &x.slice(s![50.., ..]).to_owned(),
            &y.slice(s![50..]).to_owned(),
            &st,
            &params,
        )
        .unwrap();
        let direct = sample_frequencies(2, 20, 1.0, 55).unwrap();
        assert_eq!(model.omega, direct);
    }

    #[test]
    fn resample_rejects_empty_validation() {
        let st = tiny_standardizer(1);
        let params = ResampleParams {
            k: 4,
            sigma: 1.0,
            lambda: 0.1,
            delta: 0.1,
            iters: 1,
            jitter: JitterKind::Fixed,
            seed: 1,
        };
        let err = resample_frequencies(
            &array![[0.0], [1.0]],
            &array![0.0, 1.0],
            &Array2::zeros((0, 1)),
            &Array1::zeros(0),
            &st,
            &params,
        )
        .unwrap_err();
        assert!(err.to_string().contains("validation"));
    }

    #[test]
    fn kernel_ridge_scalar_case() {
        let x = array![[0.0]];
        let y = array![2.0];
        let pred = kernel_ridge_oracle(&x, &y, 1.0, 0.5).unwrap().predict(&x);
        // (1 + λ) η = c → prediction = η = c / (1 + λ)
        assert_abs_diff_eq!(pred[0], 2.0 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn kernel_ridge_interpolates_as_lambda_vanishes() {
        let x = array![[0.0, 0.0], [1.0, 0.5], [-0.5, 1.5], [2.0, -1.0]];
        let y = array![1.0, -2.0, 0.5, 3.0];
        let pred = kernel_ridge_oracle(&x, &y, 1.0, 1e-10)
            .unwrap()
            .predict(&x);
        for i in 0..4 {
            assert!((pred[i] - y[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn cumulative_sampler_respects_weights() {
        // weights (0, 1, 0, 3): indices 1 and 3 only, in a 1:3 ratio.
        let cumulative = vec![0.0, 1.0, 1.0, 4.0];
        let mut rng = stream(5, Stream::FrequencyWalk);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            let u: f64 = rng.random();
            counts[sample_cumulative(&cumulative, u)] += 1;
        }
        assert_eq!(counts[0], 0);
        assert_eq!(counts[2], 0);
        let ratio = counts[3] as f64 / counts[1] as f64;
        assert!((2.5..=3.5).contains(&ratio), "ratio {ratio}");
    }
}
