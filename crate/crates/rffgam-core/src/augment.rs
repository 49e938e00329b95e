//! Perturbation-based training-set augmentation with Mahalanobis gating.
//!
//! Every standardized training row spawns a fixed number of Gaussian
//! perturbations; a candidate survives if its squared Mahalanobis distance
//! to the empirical center of the standardized training inputs stays below a
//! chi-squared quantile, and survivors are labeled by the already-trained
//! random Fourier feature model. The output keeps the original rows first,
//! unmodified and in order, followed by the accepted synthetic rows.

use ndarray::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma_lr;

use crate::dataset::TabularDataset;
use crate::error::{Result, RffGamError};
use crate::linalg::cholesky_lower;
use crate::rff::RffModel;
use crate::rng::{indexed_stream, Stream};

/// Controls for `augment_dataset`.
#[derive(Debug, Clone, Copy)]
pub struct AugmentConfig {
    /// Perturbations drawn per original row.
    pub n_per_point: usize,
    /// Variance of the isotropic Gaussian perturbation (standardized space).
    pub epsilon: f64,
    /// Chi-squared quantile for the Mahalanobis acceptance gate.
    pub chi2_quantile: f64,
    pub seed: u64,
    /// Whether synthetic rows also feed the local model fits downstream
    /// (they always feed the clustering refit).
    pub synthetic_in_locals: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            n_per_point: 10,
            epsilon: 0.05,
            chi2_quantile: 0.99,
            seed: 0,
            synthetic_in_locals: true,
        }
    }
}

/// Augmented training data: originals first, then accepted synthetics.
#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub dataset: TabularDataset,
    /// One flag per row of `dataset`.
    pub is_synthetic: Vec<bool>,
    /// Perturbations drawn in total.
    pub n_candidates: usize,
    /// Candidates that passed the Mahalanobis gate.
    pub n_accepted: usize,
    /// The squared-distance threshold that was applied.
    pub threshold: f64,
}

/// Chi-squared CDF with `p` degrees of freedom.
fn chi2_cdf(p: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(p / 2.0, x / 2.0)
}

/// Quantile of the chi-squared distribution with `p` degrees of freedom,
/// computed by a bracketed bisection on the regularized lower incomplete
/// gamma function. Absolute error at most 1e-9.
pub fn chi2_threshold(p: usize, quantile: f64) -> Result<f64> {
    if p == 0 {
        return Err(RffGamError::invalid("degrees of freedom must be positive"));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(RffGamError::invalid("quantile must lie strictly in (0, 1)"));
    }
    let dof = p as f64;
    // expand the bracket until the CDF passes the target
    let mut hi = dof.max(1.0);
    while chi2_cdf(dof, hi) < quantile {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(RffGamError::numerical("chi-squared bracket diverged"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(dof, mid) < quantile {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean and covariance (MLE) of the rows of a matrix.
fn mean_and_covariance(x: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let (n, p) = x.dim();
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut cov = Array2::zeros((p, p));
    for row in x.rows() {
        let c = &row - &mean;
        for a in 0..p {
            for b in 0..p {
                cov[[a, b]] += c[a] * c[b];
            }
        }
    }
    (mean, cov / n as f64)
}

/// Generate the augmented dataset.
///
/// Perturbations are applied in the labeler's standardized feature space and
/// mapped back through its standardizer; the Mahalanobis statistics come
/// from the standardized original training inputs only. Candidate labels
/// come from the labeler's predictions. Each source row derives its own
/// random stream, so results are reproducible independent of chunking.
pub fn augment_dataset(
    train: &TabularDataset,
    labeler: &RffModel,
    config: &AugmentConfig,
) -> Result<AugmentedDataset> {
    let (n, p) = train.x.dim();
    if n == 0 {
        return Err(RffGamError::invalid("cannot augment an empty dataset"));
    }
    if labeler.standardizer.n_features() != p {
        return Err(RffGamError::invalid(format!(
            "labeler expects {} features, dataset has {p}",
            labeler.standardizer.n_features()
        )));
    }
    if !(config.epsilon > 0.0) {
        return Err(RffGamError::invalid("epsilon must be positive"));
    }
    if !(config.chi2_quantile > 0.0 && config.chi2_quantile < 1.0) {
        return Err(RffGamError::invalid("chi2_quantile must lie in (0, 1)"));
    }

    let x_std = labeler.standardizer.transform(&train.x)?;
    let (center, mut cov) = mean_and_covariance(&x_std);
    let chol = match cholesky_lower(&cov) {
        Ok(l) => l,
        Err(_) => {
            // singular empirical covariance: stabilize and retry once
            for i in 0..p {
                cov[[i, i]] += 1e-8;
            }
            cholesky_lower(&cov).map_err(|_| {
                RffGamError::numerical(
                    "empirical covariance of the training inputs is singular",
                )
            })?
        }
    };
    let threshold = chi2_threshold(p, config.chi2_quantile)?;
    let noise_sd = config.epsilon.sqrt();

    // Squared Mahalanobis distance via one triangular solve.
    let mahalanobis_sq = |c: &Array1<f64>| -> f64 {
        let mut u = vec![0.0; p];
        for i in 0..p {
            let mut acc = c[i] - center[i];
            for j in 0..i {
                acc -= chol[[i, j]] * u[j];
            }
            u[i] = acc / chol[[i, i]];
        }
        u.iter().map(|v| v * v).sum()
    };

    let mut accepted_std: Vec<Array1<f64>> = Vec::new();
    let mut n_candidates = 0;
    for i in 0..n {
        let mut rng = indexed_stream(config.seed, Stream::Augment, i as u64);
        for _ in 0..config.n_per_point {
            n_candidates += 1;
            let mut c = x_std.row(i).to_owned();
            for v in c.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += noise_sd * z;
            }
            if mahalanobis_sq(&c) <= threshold {
                accepted_std.push(c);
            }
        }
    }
    let n_accepted = accepted_std.len();

    // Label the survivors with the RFF model and map back to raw space.
    let mut synth_std = Array2::zeros((n_accepted, p));
    for (r, c) in accepted_std.iter().enumerate() {
        synth_std.row_mut(r).assign(c);
    }
    let labels = labeler.predict_standardized(&synth_std)?;
    let synth_raw = labeler.standardizer.inverse(&synth_std)?;

    let total = n + n_accepted;
    let mut x_out = Array2::zeros((total, p));
    let mut y_out = Array1::zeros(total);
    x_out.slice_mut(s![..n, ..]).assign(&train.x);
    y_out.slice_mut(s![..n]).assign(&train.y);
    x_out.slice_mut(s![n.., ..]).assign(&synth_raw);
    y_out.slice_mut(s![n..]).assign(&labels);

    let mut is_synthetic = vec![false; total];
    for flag in is_synthetic.iter_mut().skip(n) {
        *flag = true;
    }

    Ok(AugmentedDataset {
        dataset: TabularDataset {
            feature_names: train.feature_names.clone(),
            target_name: train.target_name.clone(),
            x: x_out,
            y: y_out,
            source: format!("{} (augmented)", train.source),
            rows_read: train.rows_read,
            rows_dropped: train.rows_dropped,
        },
        is_synthetic,
        n_candidates,
        n_accepted,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rff::{fit_coefficients, build_design_matrix, sample_frequencies};
    use crate::rng::stream;
    use crate::standardize::Standardizer;
    use rand::Rng;

    fn toy_dataset(n: usize, p: usize, seed: u64) -> TabularDataset {
        let mut rng = stream(seed, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(n, |i| x.row(i).sum());
        TabularDataset {
            feature_names: (0..p).map(|j| format!("f{j}")).collect(),
            target_name: "y".into(),
            x,
            y,
            source: "toy".into(),
            rows_read: n,
            rows_dropped: 0,
        }
    }

    fn toy_labeler(train: &TabularDataset, seed: u64) -> RffModel {
        let standardizer = Standardizer::fit(&train.x).unwrap();
        let xs = standardizer.transform(&train.x).unwrap();
        let omega = sample_frequencies(train.n_features(), 40, 1.0, seed).unwrap();
        let y_mean = train.y.sum() / train.y.len() as f64;
        let yc = train.y.mapv(|v| v - y_mean);
        let phi = build_design_matrix(&xs, &omega).unwrap();
        let beta = fit_coefficients(&phi, &yc, 1.0).unwrap();
        RffModel {
            omega,
            beta,
            sigma: 1.0,
            lambda: 1.0 / train.n_rows() as f64,
            standardizer,
            y_mean,
        }
    }

    #[test]
    fn chi2_thresholds_match_reference_values() {
        // closed form for two degrees of freedom: −2·ln(1−q)
        let t2 = chi2_threshold(2, 0.99).unwrap();
        assert!((t2 - 9.21034037197618).abs() < 1e-6, "got {t2}");
        let t1 = chi2_threshold(1, 0.99).unwrap();
        assert!((t1 - 6.6349).abs() < 1e-3, "got {t1}");
        let t5 = chi2_threshold(5, 0.99).unwrap();
        assert!((t5 - 15.0863).abs() < 1e-3, "got {t5}");
    }

    #[test]
    fn chi2_threshold_inverts_the_cdf() {
        for p in [1usize, 3, 7, 20] {
            for q in [0.1, 0.5, 0.9, 0.99, 0.999] {
                let x = chi2_threshold(p, q).unwrap();
                let back = chi2_cdf(p as f64, x);
                assert!((back - q).abs() < 1e-8, "p={p} q={q}: cdf({x})={back}");
            }
        }
        assert!(chi2_threshold(0, 0.5).is_err());
        assert!(chi2_threshold(3, 1.0).is_err());
    }

    #[test]
    fn originals_come_first_unmodified() {
        let train = toy_dataset(50, 3, 1);
        let labeler = toy_labeler(&train, 2);
        let aug = augment_dataset(&train, &labeler, &AugmentConfig::default()).unwrap();
        assert!(aug.dataset.n_rows() >= train.n_rows());
        for i in 0..train.n_rows() {
            assert!(!aug.is_synthetic[i]);
            assert_eq!(aug.dataset.y[i].to_bits(), train.y[i].to_bits());
            for j in 0..train.n_features() {
                assert_eq!(
                    aug.dataset.x[[i, j]].to_bits(),
                    train.x[[i, j]].to_bits()
                );
            }
        }
        assert!(aug.is_synthetic[train.n_rows()..].iter().all(|&f| f));
        assert_eq!(
            aug.n_candidates,
            train.n_rows() * AugmentConfig::default().n_per_point
        );
    }

    #[test]
    fn accepted_rows_satisfy_the_gate_on_recheck() {
        let train = toy_dataset(60, 3, 3);
        let labeler = toy_labeler(&train, 4);
        let config = AugmentConfig {
            epsilon: 0.5, // larger steps so some candidates are rejected
            ..AugmentConfig::default()
        };
        let aug = augment_dataset(&train, &labeler, &config).unwrap();
        assert!(aug.n_accepted < aug.n_candidates, "expected some rejections");

        // recheck the inequality from scratch
        let xs = labeler.standardizer.transform(&train.x).unwrap();
        let (mean, cov) = mean_and_covariance(&xs);
        let l = cholesky_lower(&cov).unwrap();
        let synth = labeler
            .standardizer
            .transform(&aug.dataset.x)
            .unwrap();
        for (i, &is_synth) in aug.is_synthetic.iter().enumerate() {
            if !is_synth {
                continue;
            }
            let c = synth.row(i).to_owned();
            let mut u = vec![0.0; 3];
            for a in 0..3 {
                let mut acc = c[a] - mean[a];
                for b in 0..a {
                    acc -= l[[a, b]] * u[b];
                }
                u[a] = acc / l[[a, a]];
            }
            let d2: f64 = u.iter().map(|v| v * v).sum();
            assert!(
                d2 <= aug.threshold + 1e-9,
                "row {i}: distance {d2} above threshold {}",
                aug.threshold
            );
        }
    }

    #[test]
    fn vanishing_epsilon_reproduces_rff_labels_at_the_originals() {
        let mut train = toy_dataset(40, 2, 5);
        // keep the fitted surface's gradient well below 1/noise_sd so the
        // displacement at vanishing epsilon cannot move predictions by 1e-6
        train.y.mapv_inplace(|v| 0.1 * v);
        let labeler = toy_labeler(&train, 6);
        let config = AugmentConfig {
            epsilon: 1e-12,
            ..AugmentConfig::default()
        };
        let aug = augment_dataset(&train, &labeler, &config).unwrap();
        // every candidate accepted
        assert_eq!(aug.n_accepted, aug.n_candidates);
        let at_originals = labeler.predict(&train.x).unwrap();
        let n = train.n_rows();
        for (r, &is_synth) in aug.is_synthetic.iter().enumerate() {
            if !is_synth {
                continue;
            }
            // synthetic rows come in source order, n_per_point per source
            let src = (r - n) / config.n_per_point;
            assert!(
                (aug.dataset.y[r] - at_originals[src]).abs() < 1e-6,
                "row {r}: label {} vs prediction {}",
                aug.dataset.y[r],
                at_originals[src]
            );
        }
    }

    #[test]
    fn standard_gaussian_acceptance_matches_the_quantile() {
        // With truly Gaussian standardized inputs and epsilon small, the
        // candidate distribution is essentially the data distribution and
        // the acceptance fraction approaches the configured quantile.
        let n = 2000;
        let mut rng = stream(7, Stream::Bootstrap);
        let x = Array2::from_shape_fn((n, 2), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let y = Array1::from_shape_fn(n, |i| x.row(i).sum());
        let train = TabularDataset {
            feature_names: vec!["a".into(), "b".into()],
            target_name: "y".into(),
            x,
            y,
            source: "gauss".into(),
            rows_read: n,
            rows_dropped: 0,
        };
        let labeler = toy_labeler(&train, 8);
        let config = AugmentConfig {
            epsilon: 1e-6,
            n_per_point: 5,
            ..AugmentConfig::default()
        };
        let aug = augment_dataset(&train, &labeler, &config).unwrap();
        let frac = aug.n_accepted as f64 / aug.n_candidates as f64;
        assert!(
            (0.97..=1.0).contains(&frac),
            "acceptance fraction {frac} outside [0.97, 1.0]"
        );
    }

    #[test]
    fn augmentation_is_deterministic_per_seed() {
        let train = toy_dataset(30, 3, 9);
        let labeler = toy_labeler(&train, 10);
        let config = AugmentConfig {
            epsilon: 0.3,
            seed: 42,
            ..AugmentConfig::default()
        };
        let a = augment_dataset(&train, &labeler, &config).unwrap();
        let b = augment_dataset(&train, &labeler, &config).unwrap();
        assert_eq!(a.dataset.n_rows(), b.dataset.n_rows());
        for (x, y) in a.dataset.x.iter().zip(b.dataset.x.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.dataset.y.iter().zip(b.dataset.y.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let c = augment_dataset(
            &train,
            &labeler,
            &AugmentConfig {
                seed: 43,
                ..config
            },
        )
        .unwrap();
        assert_ne!(
            a.dataset.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            c.dataset.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
