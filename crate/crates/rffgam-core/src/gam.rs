//! Penalized additive models on cubic B-spline bases, fitted by backfitting.
//!
//! Each feature gets its own spline basis with interior knots at evenly
//! spaced quantiles of that feature's training values. The roughness penalty
//! is the squared second difference of the coefficient vector, whose null
//! space contains constant and linear coefficient profiles. Features whose
//! quantile knots collapse degrade gracefully: fewer than two surviving
//! interior knots turn the component into a plain linear term, and a
//! constant column contributes nothing at all.

use ndarray::prelude::*;

use crate::error::{Result, RffGamError};
use crate::linalg::{cholesky_lower, cholesky_solve};

/// How a component represents its feature after knot placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Full B-spline basis of the configured degree.
    Spline,
    /// Fewer than two interior knots survived deduplication: linear term.
    Linear,
    /// The training column was constant: the component is identically zero.
    Constant,
}

/// Univariate basis attached to one feature.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    pub feature_index: usize,
    pub kind: BasisKind,
    /// Strictly increasing interior knots (empty for the degraded kinds).
    pub interior_knots: Vec<f64>,
    /// Training range; inputs are clamped into it before evaluation.
    pub boundary: (f64, f64),
    pub degree: usize,
}

impl SplineBasis {
    /// Number of basis functions Q.
    pub fn n_basis(&self) -> usize {
        match self.kind {
            BasisKind::Spline => self.interior_knots.len() + self.degree + 1,
            BasisKind::Linear => 2,
            BasisKind::Constant => 1,
        }
    }

    /// Full clamped knot vector (boundary knots repeated degree+1 times).
    fn knot_vector(&self) -> Vec<f64> {
        let (lo, hi) = self.boundary;
        let mut t = Vec::with_capacity(2 * (self.degree + 1) + self.interior_knots.len());
        t.extend(std::iter::repeat(lo).take(self.degree + 1));
        t.extend(self.interior_knots.iter().copied());
        t.extend(std::iter::repeat(hi).take(self.degree + 1));
        t
    }

    /// Evaluate the basis at each value of `x`, clamping to the boundary.
    /// Returns an n×Q design matrix.
    pub fn evaluate(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RffGamError::invalid(
                "basis evaluation input contains non-finite values",
            ));
        }
        let n = x.len();
        let q = self.n_basis();
        let (lo, hi) = self.boundary;
        let mut out = Array2::zeros((n, q));
        match self.kind {
            BasisKind::Constant => {
                out.fill(1.0);
            }
            BasisKind::Linear => {
                for (i, &v) in x.iter().enumerate() {
                    out[[i, 0]] = 1.0;
                    out[[i, 1]] = v.clamp(lo, hi);
                }
            }
            BasisKind::Spline => {
                let t = self.knot_vector();
                let d = self.degree;
                // valid spans are [d, m-1] where m = q
                let mut scratch = vec![0.0; d + 1];
                let mut left = vec![0.0; d + 1];
                let mut right = vec![0.0; d + 1];
                for (i, &raw) in x.iter().enumerate() {
                    let v = raw.clamp(lo, hi);
                    let mut span = t.partition_point(|&k| k <= v);
                    span = span.saturating_sub(1).clamp(d, q - 1);
                    de_boor_row(&t, d, span, v, &mut scratch, &mut left, &mut right);
                    for (r, &val) in scratch.iter().enumerate() {
                        out[[i, span - d + r]] = val;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One row of the B-spline basis by the de Boor recursion: writes the d+1
/// basis values that are non-zero on the given knot span into `n_out`.
fn de_boor_row(
    t: &[f64],
    degree: usize,
    span: usize,
    x: f64,
    n_out: &mut [f64],
    left: &mut [f64],
    right: &mut [f64],
) {
    n_out[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n_out[r] / (right[r + 1] + left[j - r]);
            n_out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n_out[j] = saved;
    }
}

/// Linear interpolation quantile of sorted data at fraction `f`.
pub(crate) fn quantile_sorted(sorted: &[f64], f: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = f * (n as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Build the basis for one feature column.
///
/// Interior knots sit at the evenly spaced quantiles i/(n_knots+1) of the
/// column, i = 1..n_knots, then deduplicate and drop any knot that is not
/// strictly inside the (min, max) range. If fewer than two interior knots
/// survive the component degrades to a linear term; a constant column
/// degrades further to an inert component.
pub fn build_spline_basis(
    x_col: &Array1<f64>,
    feature_index: usize,
    n_knots: usize,
    degree: usize,
) -> Result<SplineBasis> {
    if x_col.is_empty() {
        return Err(RffGamError::invalid("cannot build a basis on an empty column"));
    }
    if x_col.iter().any(|v| !v.is_finite()) {
        return Err(RffGamError::invalid(
            "basis construction input contains non-finite values",
        ));
    }
    if degree == 0 {
        return Err(RffGamError::invalid("spline degree must be at least 1"));
    }
    let mut sorted: Vec<f64> = x_col.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if lo == hi {
        return Ok(SplineBasis {
            feature_index,
            kind: BasisKind::Constant,
            interior_knots: Vec::new(),
            boundary: (lo, hi),
            degree,
        });
    }
    let mut interior = Vec::with_capacity(n_knots);
    for i in 1..=n_knots {
        let q = quantile_sorted(&sorted, i as f64 / (n_knots as f64 + 1.0));
        if q > lo && q < hi && interior.last().map_or(true, |&last| q > last) {
            interior.push(q);
        }
    }
    if interior.len() < 2 {
        return Ok(SplineBasis {
            feature_index,
            kind: BasisKind::Linear,
            interior_knots: Vec::new(),
            boundary: (lo, hi),
            degree,
        });
    }
    Ok(SplineBasis {
        feature_index,
        kind: BasisKind::Spline,
        interior_knots: interior,
        boundary: (lo, hi),
        degree,
    })
}

/// Second-difference roughness penalty Ω = DᵀD for a coefficient vector of
/// length `q`, where D is the (q−2)×q second-difference operator. Constant
/// and index-linear coefficient profiles lie in its null space.
pub fn penalty_matrix(q: usize) -> Result<Array2<f64>> {
    if q < 3 {
        return Err(RffGamError::invalid(format!(
            "second-difference penalty needs at least 3 coefficients, got {q}"
        )));
    }
    let mut omega = Array2::zeros((q, q));
    for r in 0..q - 2 {
        // row r of D has (1, −2, 1) at columns (r, r+1, r+2)
        let idx = [r, r + 1, r + 2];
        let val = [1.0, -2.0, 1.0];
        for a in 0..3 {
            for b in 0..3 {
                omega[[idx[a], idx[b]]] += val[a] * val[b];
            }
        }
    }
    Ok(omega)
}

/// Additive model: y ≈ α + Σ_j g_j(x_j).
#[derive(Debug, Clone)]
pub struct GamModel {
    pub alpha: f64,
    pub bases: Vec<SplineBasis>,
    /// Coefficient vector per component (length bases[j].n_basis()).
    pub coefficients: Vec<Array1<f64>>,
    pub smooth_lambda: f64,
    /// Whether backfitting met the coefficient-change tolerance.
    pub converged: bool,
    pub sweeps_used: usize,
}

/// Knobs for `fit_gam`.
#[derive(Debug, Clone, Copy)]
pub struct GamOptions {
    pub n_knots: usize,
    pub degree: usize,
    pub smooth_lambda: f64,
    /// Stop when the largest coefficient change in a sweep drops below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for GamOptions {
    fn default() -> Self {
        GamOptions {
            n_knots: 10,
            degree: 3,
            smooth_lambda: 1.0,
            tol: 1e-7,
            max_sweeps: 100,
        }
    }
}

/// Fit the additive model by cyclic backfitting.
///
/// The intercept is pinned to the mean of `y`; each sweep solves the
/// penalized least-squares problem for one component on the partial
/// residuals, then re-centers that component to mean zero over the training
/// rows (re-expressed through the coefficients, which is exact because the
/// basis reproduces constants). Failure to reach the tolerance within
/// `max_sweeps` is reported through the `converged` flag, not an error.
pub fn fit_gam(x: &Array2<f64>, y: &Array1<f64>, opts: &GamOptions) -> Result<GamModel> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(RffGamError::invalid(format!(
            "feature rows ({n}) and target length ({}) disagree",
            y.len()
        )));
    }
    if p == 0 {
        return Err(RffGamError::invalid("need at least one feature"));
    }
    if n <= p * opts.degree {
        return Err(RffGamError::invalid(format!(
            "need more than p·degree = {} rows to fit, got {n}",
            p * opts.degree
        )));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(RffGamError::invalid("training data contains non-finite values"));
    }
    if !(opts.smooth_lambda >= 0.0) {
        return Err(RffGamError::invalid("smoothing parameter must be non-negative"));
    }

    // Per-feature basis, design matrix, and factorized normal matrix.
    let mut bases = Vec::with_capacity(p);
    let mut designs = Vec::with_capacity(p);
    let mut factors = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j).to_owned();
        let basis = build_spline_basis(&col, j, opts.n_knots, opts.degree)?;
        let b = basis.evaluate(&col)?;
        let q = basis.n_basis();
        let mut normal = b.t().dot(&b);
        if basis.kind == BasisKind::Spline {
            let omega = penalty_matrix(q)?;
            normal.scaled_add(opts.smooth_lambda, &omega);
        } else {
            // Degraded components are unpenalized; a vanishing relative ridge
            // keeps the tiny system solvable when the column is collinear
            // with the intercept.
            let tr: f64 = (0..q).map(|i| normal[[i, i]]).sum();
            for i in 0..q {
                normal[[i, i]] += 1e-12 * tr.max(1.0);
            }
        }
        let l = cholesky_lower(&normal).map_err(|_| {
            RffGamError::numerical(format!(
                "normal matrix for feature {j} is singular; increase the smoothing parameter"
            ))
        })?;
        bases.push(basis);
        designs.push(b);
        factors.push(l);
    }

    let alpha = y.sum() / n as f64;
    let mut residual = y.mapv(|v| v - alpha);
    let mut coefficients: Vec<Array1<f64>> =
        bases.iter().map(|b| Array1::zeros(b.n_basis())).collect();
    let mut fitted: Vec<Array1<f64>> = vec![Array1::zeros(n); p];

    let mut converged = false;
    let mut sweeps_used = 0;
    for sweep in 1..=opts.max_sweeps {
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            let partial = &residual + &fitted[j];
            let rhs = designs[j].t().dot(&partial);
            let mut theta = cholesky_solve(&factors[j], &rhs);
            let mut g = designs[j].dot(&theta);
            let c = g.sum() / n as f64;
            center_coefficients(&bases[j], &mut theta, c);
            g.mapv_inplace(|v| v - c);
            for (a, b) in theta.iter().zip(coefficients[j].iter()) {
                max_delta = max_delta.max((a - b).abs());
            }
            residual = &partial - &g;
            fitted[j] = g;
            coefficients[j] = theta;
        }
        sweeps_used = sweep;
        if max_delta < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(GamModel {
        alpha,
        bases,
        coefficients,
        smooth_lambda: opts.smooth_lambda,
        converged,
        sweeps_used,
    })
}

/// Shift a component's coefficients so its fitted values drop by `c`.
/// Every basis here reproduces constants, so the shift is exact.
fn center_coefficients(basis: &SplineBasis, theta: &mut Array1<f64>, c: f64) {
    match basis.kind {
        // B-splines: partition of unity ⇒ subtracting c from every
        // coefficient subtracts c from the function.
        BasisKind::Spline => theta.mapv_inplace(|v| v - c),
        // intercept column carries the constant
        BasisKind::Linear | BasisKind::Constant => theta[0] -= c,
    }
}

impl GamModel {
    pub fn n_features(&self) -> usize {
        self.bases.len()
    }

    /// One additive component g_j evaluated on a vector of raw inputs.
    pub fn component(&self, j: usize, x_col: &Array1<f64>) -> Result<Array1<f64>> {
        if j >= self.bases.len() {
            return Err(RffGamError::invalid(format!(
                "component index {j} out of range for {} features",
                self.bases.len()
            )));
        }
        let b = self.bases[j].evaluate(x_col)?;
        Ok(b.dot(&self.coefficients[j]))
    }

    /// Predict on raw feature rows (inputs outside the training range are
    /// clamped to the boundary, freezing extrapolation at the edge value).
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features() {
            return Err(RffGamError::invalid(format!(
                "expected {} feature columns, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        let mut out = Array1::from_elem(x.nrows(), self.alpha);
        for j in 0..self.n_features() {
            let g = self.component(j, &x.column(j).to_owned())?;
            out += &g;
        }
        Ok(out)
    }

    /// Penalized residual sum of squares of this model on data (the
    /// backfitting objective); exposed for diagnostics and tests.
    pub fn penalized_rss(&self, x: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
        let pred = self.predict(x)?;
        let rss: f64 = y
            .iter()
            .zip(pred.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let mut pen = 0.0;
        for (basis, theta) in self.bases.iter().zip(self.coefficients.iter()) {
            if basis.kind == BasisKind::Spline {
                let omega = penalty_matrix(basis.n_basis())?;
                pen += theta.dot(&omega.dot(theta));
            }
        }
        Ok(rss + self.smooth_lambda * pen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn uniform_column(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = stream(seed, Stream::Bootstrap);
        Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn basis_is_a_partition_of_unity() {
        let x = uniform_column(200, 1);
        let basis = build_spline_basis(&x, 0, 7, 3).unwrap();
        assert_eq!(basis.kind, BasisKind::Spline);
        assert_eq!(basis.n_basis(), basis.interior_knots.len() + 4);
        let b = basis.evaluate(&x).unwrap();
        for (i, row) in b.rows().into_iter().enumerate() {
            let s: f64 = row.sum();
            assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
            assert!(row.iter().all(|&v| v >= -1e-15));
        }
    }

    #[test]
    fn boundary_points_stay_in_partition() {
        let x = uniform_column(50, 2);
        let basis = build_spline_basis(&x, 0, 5, 3).unwrap();
        let (lo, hi) = basis.boundary;
        let edges = ndarray::array![lo, hi, lo - 5.0, hi + 5.0];
        let b = basis.evaluate(&edges).unwrap();
        for row in b.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        // clamped rows equal the boundary rows exactly
        for q in 0..basis.n_basis() {
            assert_eq!(b[[2, q]].to_bits(), b[[0, q]].to_bits());
            assert_eq!(b[[3, q]].to_bits(), b[[1, q]].to_bits());
        }
    }

    #[test]
    fn de_boor_matches_cox_de_boor_recursion_oracle() {
        // Independent oracle: textbook recursive Cox–de Boor definition.
        fn cox_de_boor(t: &[f64], i: usize, d: usize, x: f64) -> f64 {
            if d == 0 {
                // half-open intervals, closed at the final one
                let last = t.len() - 1;
                let hi_end = t[i + 1] == t[last] && x == t[i + 1];
                return if (t[i] <= x && x < t[i + 1]) || hi_end {
                    1.0
                } else {
                    0.0
                };
            }
            let mut acc = 0.0;
            if t[i + d] > t[i] {
                acc += (x - t[i]) / (t[i + d] - t[i]) * cox_de_boor(t, i, d - 1, x);
            }
            if t[i + d + 1] > t[i + 1] {
                acc += (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1])
                    * cox_de_boor(t, i + 1, d - 1, x);
            }
            acc
        }

        let x = uniform_column(40, 3);
        let basis = build_spline_basis(&x, 0, 4, 3).unwrap();
        let t = basis.knot_vector();
        let probe = uniform_column(25, 4);
        let b = basis.evaluate(&probe).unwrap();
        for (r, &v) in probe.iter().enumerate() {
            let vc = v.clamp(basis.boundary.0, basis.boundary.1);
            for q in 0..basis.n_basis() {
                let want = cox_de_boor(&t, q, 3, vc);
                assert!(
                    (b[[r, q]] - want).abs() < 1e-12,
                    "mismatch at row {r}, basis {q}: {} vs {want}",
                    b[[r, q]]
                );
            }
        }
    }

    #[test]
    fn penalty_quadratic_form_on_unit_vector() {
        let omega = penalty_matrix(5).unwrap();
        let theta = ndarray::array![0.0, 0.0, 1.0, 0.0, 0.0];
        let v = theta.dot(&omega.dot(&theta));
        assert!((v - 6.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn penalty_null_space_holds_constant_and_linear_profiles() {
        let q = 9;
        let omega = penalty_matrix(q).unwrap();
        let constant = Array1::from_elem(q, 3.7);
        let linear = Array1::from_shape_fn(q, |i| -1.2 + 0.8 * i as f64);
        for theta in [constant, linear] {
            let v = theta.dot(&omega.dot(&theta));
            assert!(v.abs() < 1e-12, "null-space violation: {v}");
        }
        assert!(penalty_matrix(2).is_err());
    }

    #[test]
    fn recovers_additive_structure() {
        let n = 400;
        let mut rng = stream(9, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0_f64));
        let y = Array1::from_shape_fn(n, |i| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            (x[[i, 0]] * 1.5).sin() + 0.5 * x[[i, 1]] * x[[i, 1]] + 0.05 * noise
        });
        let opts = GamOptions {
            n_knots: 8,
            smooth_lambda: 0.5,
            ..GamOptions::default()
        };
        let model = fit_gam(&x, &y, &opts).unwrap();
        assert!(model.converged, "backfitting did not converge");
        let pred = model.predict(&x).unwrap();
        let rmse = (y
            .iter()
            .zip(pred.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rmse < 0.12, "training RMSE too high: {rmse}");
    }

    #[test]
    fn components_have_zero_training_mean() {
        let n = 150;
        let mut rng = stream(11, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0_f64));
        let y = Array1::from_shape_fn(n, |i| (6.0 * x[[i, 0]]).cos() + x[[i, 1]] - x[[i, 2]]);
        let model = fit_gam(&x, &y, &GamOptions::default()).unwrap();
        assert!((model.alpha - y.sum() / n as f64).abs() < 1e-12);
        for j in 0..3 {
            let g = model.component(j, &x.column(j).to_owned()).unwrap();
            let mean = g.sum() / n as f64;
            assert!(mean.abs() < 1e-8, "component {j} mean {mean}");
        }
    }

    #[test]
    fn objective_is_monotone_across_sweeps() {
        let n = 120;
        let mut rng = stream(13, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0_f64));
        let y = Array1::from_shape_fn(n, |i| {
            (3.0 * x[[i, 0]]).sin() * (1.0 + x[[i, 1]]) + x[[i, 2]].powi(3)
        });
        // capped sweep counts give the objective trajectory
        let mut prev = f64::INFINITY;
        for cap in 1..10 {
            let opts = GamOptions {
                n_knots: 6,
                smooth_lambda: 2.0,
                tol: 0.0,
                max_sweeps: cap,
                ..GamOptions::default()
            };
            let model = fit_gam(&x, &y, &opts).unwrap();
            let obj = model.penalized_rss(&x, &y).unwrap();
            assert!(
                obj <= prev + 1e-9 * prev.abs().max(1.0),
                "objective rose: {prev} -> {obj}"
            );
            prev = obj;
        }
    }

    #[test]
    fn training_predictions_match_final_backfit_state() {
        // predict() on the training inputs must reproduce the internal
        // fitted values the sweep converged to
        let n = 100;
        let mut rng = stream(17, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0_f64));
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]] - 2.0 * x[[i, 1]].abs());
        let model = fit_gam(&x, &y, &GamOptions::default()).unwrap();
        let pred = model.predict(&x).unwrap();
        // recompute from stored pieces
        let mut want = Array1::from_elem(n, model.alpha);
        for j in 0..2 {
            want += &model
                .bases[j]
                .evaluate(&x.column(j).to_owned())
                .unwrap()
                .dot(&model.coefficients[j]);
        }
        for (a, b) in pred.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_and_low_cardinality_columns_degrade() {
        let n = 60;
        let mut rng = stream(19, Stream::Bootstrap);
        let mut x = Array2::zeros((n, 3));
        for i in 0..n {
            x[[i, 0]] = rng.random_range(-1.0..1.0);
            x[[i, 1]] = 4.2; // constant
            x[[i, 2]] = if i % 2 == 0 { 0.0 } else { 1.0 }; // two values
        }
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]] + 3.0 * x[[i, 2]]);
        let model = fit_gam(&x, &y, &GamOptions::default()).unwrap();
        assert_eq!(model.bases[1].kind, BasisKind::Constant);
        assert_eq!(model.bases[2].kind, BasisKind::Linear);
        // the constant column contributes nothing
        let g1 = model.component(1, &x.column(1).to_owned()).unwrap();
        assert!(g1.iter().all(|v| v.abs() < 1e-9));
        // the fit stays accurate (the spline component of x0 carries a small
        // shrinkage bias from the roughness penalty, so not exact)
        let pred = model.predict(&x).unwrap();
        let rmse = (pred
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let n = 80;
        let mut rng = stream(23, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0_f64));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0_f64));
        let opts = GamOptions {
            max_sweeps: 1,
            tol: 1e-300,
            ..GamOptions::default()
        };
        let model = fit_gam(&x, &y, &opts).unwrap();
        assert!(!model.converged);
        assert_eq!(model.sweeps_used, 1);
    }

    #[test]
    fn rejects_underdetermined_problems() {
        let x = Array2::zeros((5, 2));
        let y = Array1::zeros(5);
        // 5 ≤ p·degree = 6
        assert!(fit_gam(&x, &y, &GamOptions::default()).is_err());
    }

    #[test]
    fn extrapolation_is_clamped() {
        let n = 100;
        let mut rng = stream(29, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.0..1.0_f64));
        let y = Array1::from_shape_fn(n, |i| (x[[i, 0]] * 4.0).sin());
        let model = fit_gam(&x, &y, &GamOptions::default()).unwrap();
        let probe = ndarray::array![[-10.0], [0.0], [1.0], [10.0]];
        let pred = model.predict(&probe).unwrap();
        let (lo, hi) = model.bases[0].boundary;
        let edge = model.predict(&ndarray::array![[lo], [hi]]).unwrap();
        assert!((pred[0] - edge[0]).abs() < 1e-12);
        assert!((pred[3] - edge[1]).abs() < 1e-12);
    }
}
