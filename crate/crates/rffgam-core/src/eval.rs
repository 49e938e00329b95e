//! Metrics, uncertainty quantification, hyperparameter grid search, partial
//! dependence, and responsibility profiling, plus the CSV exports for each.

use std::path::Path;

use ndarray::prelude::*;
use rand::Rng;

use crate::dataset::{train_test_split, TabularDataset};
use crate::error::{Result, RffGamError};
use crate::gam::quantile_sorted;
use crate::latent::fit_pca;
use crate::mixture::{
    cluster_feature_matrix, model_to_string, train_pipeline, train_stage1, train_with_rff_parts,
    AblationMode, MixtureModel, PipelineConfig, SpatialGroup,
};
use crate::rng::{indexed_stream, stream, Stream};

/// Summary of one train/evaluate run.
///
/// `protocol` names the procedure that produced the interval, because a
/// single-split bootstrap over test residuals and repeated-split
/// cross-validation are both supported and yield different intervals.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub protocol: String,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runtime_seconds: f64,
    pub config: PipelineConfig,
}

/// Root mean square error between predictions and ground truth.
pub fn rmse(pred: &Array1<f64>, truth: &Array1<f64>) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(RffGamError::invalid(format!(
            "length mismatch: {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(RffGamError::invalid("rmse of empty vectors is undefined"));
    }
    let sq: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sq / pred.len() as f64).sqrt())
}

/// RMSE of a residual vector (against zero).
fn residual_rmse(residuals: &[f64]) -> f64 {
    let sq: f64 = residuals.iter().map(|r| r * r).sum();
    (sq / residuals.len() as f64).sqrt()
}

/// Bootstrap confidence interval for the RMSE implied by a residual vector.
///
/// Residuals are resampled with replacement `b` times; each resample yields
/// an RMSE, and the empirical outer quantiles are collapsed to a symmetric
/// half-width around the point estimate, matching the ± convention of the
/// reported tables. The interval therefore always contains the point RMSE.
pub fn bootstrap_ci(
    residuals: &Array1<f64>,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if residuals.is_empty() {
        return Err(RffGamError::invalid("bootstrap needs at least one residual"));
    }
    if b == 0 {
        return Err(RffGamError::invalid("bootstrap needs at least one resample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(RffGamError::invalid("confidence level must lie in (0, 1)"));
    }
    let n = residuals.len();
    let point = residual_rmse(residuals.as_slice().unwrap());
    let mut rng = stream(seed, Stream::Bootstrap);
    let mut stats = Vec::with_capacity(b);
    let mut resample = vec![0.0; n];
    for _ in 0..b {
        for slot in resample.iter_mut() {
            *slot = residuals[rng.random_range(0..n)];
        }
        stats.push(residual_rmse(&resample));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    let q_lo = quantile_sorted(&stats, tail);
    let q_hi = quantile_sorted(&stats, 1.0 - tail);
    let half = (q_hi - q_lo) / 2.0;
    Ok((point - half, point + half))
}

/// Outcome of repeated random-split cross-validation.
#[derive(Debug, Clone)]
pub struct MonteCarloCv {
    pub mean_rmse: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Test RMSE of each successful repetition, in repetition order.
    pub rmses: Vec<f64>,
    /// (repetition index, error message) for each failed repetition.
    pub failures: Vec<(usize, String)>,
}

/// Repeated random-split cross-validation of the full training pipeline.
///
/// Each repetition draws its own train/test split and pipeline seed from an
/// indexed stream, so repetitions are independent and reproducible. Failing
/// repetitions are recorded and excluded from the aggregate; the interval is
/// the normal approximation `mean ± 1.96·sd/√m` over the `m` successes.
pub fn monte_carlo_cv(
    dataset: &TabularDataset,
    config: &PipelineConfig,
    repeats: usize,
    split: f64,
    seed: u64,
) -> Result<MonteCarloCv> {
    if repeats < 2 {
        return Err(RffGamError::invalid("cross-validation needs at least 2 repeats"));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(RffGamError::invalid("split fraction must lie in (0, 1)"));
    }
    let mut rmses = Vec::new();
    let mut failures = Vec::new();
    for rep in 0..repeats {
        let rep_seed = {
            let mut r = indexed_stream(seed, Stream::MonteCarloCv, rep as u64);
            r.random::<u64>()
        };
        match run_one_split(dataset, config, split, rep_seed) {
            Ok(value) => rmses.push(value),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    if rmses.is_empty() {
        return Err(RffGamError::numerical(format!(
            "all {repeats} cross-validation repetitions failed; first error: {}",
            failures[0].1
        )));
    }
    let m = rmses.len() as f64;
    let mean = rmses.iter().sum::<f64>() / m;
    let half = if rmses.len() >= 2 {
        let var = rmses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
        1.96 * (var / m).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloCv {
        mean_rmse: mean,
        ci_low: mean - half,
        ci_high: mean + half,
        rmses,
        failures,
    })
}

fn run_one_split(
    dataset: &TabularDataset,
    config: &PipelineConfig,
    split: f64,
    rep_seed: u64,
) -> Result<f64> {
    let idx = train_test_split(dataset.n_rows(), split, rep_seed)?;
    let train = dataset.select_rows(&idx.train);
    let test = dataset.select_rows(&idx.test);
    let rep_config = PipelineConfig {
        seed: rep_seed,
        ..config.clone()
    };
    let model = train_pipeline(&train, &rep_config)?;
    let pred = model.predict(&test.x)?;
    rmse(&pred, &test.y)
}

/// Test-RMSE grid over mixture sizes and latent dimensions.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub l_values: Vec<usize>,
    pub d_values: Vec<usize>,
    /// `rmse[i][j]` is the cell for `(l_values[i], d_values[j])`; `None`
    /// marks a failed cell.
    pub rmse: Vec<Vec<Option<f64>>>,
    /// Serialized model document per successful cell, aligned with `rmse`.
    pub models: Vec<Vec<Option<String>>>,
    /// (l, d, error message) for each failed cell.
    pub failures: Vec<(usize, usize, String)>,
}

impl GridResult {
    /// The (l, d, rmse) of the best successful cell, if any.
    pub fn best_cell(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, &l) in self.l_values.iter().enumerate() {
            for (j, &d) in self.d_values.iter().enumerate() {
                if let Some(v) = self.rmse[i][j] {
                    if best.map_or(true, |(_, _, bv)| v < bv) {
                        best = Some((l, d, v));
                    }
                }
            }
        }
        best
    }
}

/// Exhaustive search over the Cartesian product of `l_values` × `d_values`.
///
/// Every cell trains on the same 80/20 split drawn from the base seed, and
/// each cell's result is identical to a standalone run with that cell's
/// configuration: the stage-1 model does not depend on (L, d) and is reused,
/// and the latent projector is a truncation of one spectral decomposition,
/// which reproduces the narrower fits row for row. Failed cells are recorded
/// as missing rather than aborting the sweep.
pub fn grid_search(
    dataset: &TabularDataset,
    config: &PipelineConfig,
    l_values: &[usize],
    d_values: &[usize],
) -> Result<GridResult> {
    if l_values.is_empty() || d_values.is_empty() {
        return Err(RffGamError::invalid("grid ranges must be non-empty"));
    }
    let idx = train_test_split(dataset.n_rows(), 0.8, config.seed)?;
    let train = dataset.select_rows(&idx.train);
    let test = dataset.select_rows(&idx.test);

    let mut rmse_grid = vec![vec![None; d_values.len()]; l_values.len()];
    let mut model_grid = vec![vec![None; d_values.len()]; l_values.len()];
    let mut failures = Vec::new();

    // Shared stage-1 state for the RFF-based modes. The stage-1 fit is
    // (L, d)-independent, so one fit plus one full-width spectral
    // decomposition serves every cell.
    let cache = match config.ablation_mode {
        AblationMode::None | AblationMode::LocalLinear => {
            let stage1_config = PipelineConfig {
                l: 1,
                d: 1,
                ..config.clone()
            };
            let rff = train_stage1(&train, &stage1_config)?;
            let s = rff.intermediate_features(&cluster_feature_matrix(&train, &stage1_config))?;
            let d_cache = d_values
                .iter()
                .copied()
                .max()
                .unwrap()
                .min(s.nrows())
                .min(s.ncols());
            let projector = fit_pca(&s, d_cache)?;
            Some((rff, s, projector, d_cache))
        }
        _ => None,
    };

    for (i, &l) in l_values.iter().enumerate() {
        for (j, &d) in d_values.iter().enumerate() {
            let cell_config = PipelineConfig {
                l,
                d,
                ..config.clone()
            };
            let outcome = (|| -> Result<(f64, String)> {
                let model = match &cache {
                    Some((rff, s, projector, d_cache)) => {
                        cell_config.validate(train.n_features())?;
                        if d > *d_cache {
                            // wider than the data supports; surface the
                            // same error a standalone fit would raise
                            fit_pca(s, d)?;
                            unreachable!("fit_pca must reject d above the cache width");
                        }
                        train_with_rff_parts(
                            &train,
                            &cell_config,
                            rff.clone(),
                            s,
                            projector.truncate(d)?,
                            None,
                        )?
                    }
                    None => train_pipeline(&train, &cell_config)?,
                };
                let pred = model.predict(&test.x)?;
                let value = rmse(&pred, &test.y)?;
                Ok((value, model_to_string(&model)))
            })();
            match outcome {
                Ok((value, doc)) => {
                    rmse_grid[i][j] = Some(value);
                    model_grid[i][j] = Some(doc);
                }
                Err(e) => failures.push((l, d, e.to_string())),
            }
        }
    }

    Ok(GridResult {
        l_values: l_values.to_vec(),
        d_values: d_values.to_vec(),
        rmse: rmse_grid,
        models: model_grid,
        failures,
    })
}

/// A partial-dependence curve for one feature.
#[derive(Debug, Clone)]
pub struct PdCurve {
    pub feature: usize,
    pub x: Vec<f64>,
    pub pd: Vec<f64>,
}

/// Partial dependence of a predictor on feature `j`.
///
/// The grid is evenly spaced over the central quantile range of the training
/// column (1% to 99%), which keeps the curve away from spline-boundary
/// artifacts; at each grid value the predictions over all training rows with
/// coordinate `j` replaced are averaged.
pub fn partial_dependence<F>(
    predict: F,
    x_train: &Array2<f64>,
    j: usize,
    grid_size: usize,
) -> Result<PdCurve>
where
    F: Fn(&Array2<f64>) -> Result<Array1<f64>>,
{
    if j >= x_train.ncols() {
        return Err(RffGamError::invalid(format!(
            "feature index {j} out of range for {} columns",
            x_train.ncols()
        )));
    }
    if grid_size < 2 {
        return Err(RffGamError::invalid("partial dependence needs at least 2 grid points"));
    }
    if x_train.nrows() == 0 {
        return Err(RffGamError::invalid("partial dependence needs training rows"));
    }
    let mut col: Vec<f64> = x_train.column(j).to_vec();
    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = quantile_sorted(&col, 0.01);
    let hi = quantile_sorted(&col, 0.99);

    let mut xs = Vec::with_capacity(grid_size);
    let mut pds = Vec::with_capacity(grid_size);
    let mut work = x_train.to_owned();
    for g in 0..grid_size {
        let v = lo + (hi - lo) * g as f64 / (grid_size - 1) as f64;
        work.column_mut(j).fill(v);
        let pred = predict(&work)?;
        xs.push(v);
        pds.push(pred.sum() / pred.len() as f64);
    }
    Ok(PdCurve { feature: j, x: xs, pd: pds })
}

/// Mean responsibilities grouped by an integer category.
#[derive(Debug, Clone)]
pub struct ResponsibilityProfile {
    /// Observed categories, ascending.
    pub categories: Vec<usize>,
    /// Rows per observed category.
    pub counts: Vec<usize>,
    /// Categories inside the observed span with no rows (their profile rows
    /// are omitted; callers should surface these as warnings).
    pub omitted: Vec<usize>,
    /// `categories.len()` × L matrix of mean responsibilities.
    pub profile: Array2<f64>,
}

/// Mean posterior responsibility per category: `γ̄_ℓ(h)` is the average of
/// `γ_{iℓ}` over the rows whose category is `h`. Each profile row is itself
/// a convex combination of simplex points, so it sums to one.
pub fn responsibility_profile<C>(
    model: &MixtureModel,
    x: &Array2<f64>,
    category_of: C,
) -> Result<ResponsibilityProfile>
where
    C: Fn(usize) -> usize,
{
    if x.nrows() == 0 {
        return Err(RffGamError::invalid("responsibility profile needs at least one row"));
    }
    let gamma = model.responsibilities(x)?;
    let l = gamma.ncols();

    let labels: Vec<usize> = (0..x.nrows()).map(&category_of).collect();
    let mut categories: Vec<usize> = labels.clone();
    categories.sort_unstable();
    categories.dedup();

    let lo = *categories.first().unwrap();
    let hi = *categories.last().unwrap();
    let omitted: Vec<usize> = (lo..=hi).filter(|c| !categories.contains(c)).collect();

    let mut profile = Array2::zeros((categories.len(), l));
    let mut counts = vec![0usize; categories.len()];
    for (i, &label) in labels.iter().enumerate() {
        let row = categories.binary_search(&label).unwrap();
        counts[row] += 1;
        for c in 0..l {
            profile[[row, c]] += gamma[[i, c]];
        }
    }
    for (row, &count) in counts.iter().enumerate() {
        for c in 0..l {
            profile[[row, c]] /= count as f64;
        }
    }
    Ok(ResponsibilityProfile {
        categories,
        counts,
        omitted,
        profile,
    })
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path)
        .map_err(|e| RffGamError::invalid(format!("cannot write {}: {e}", path.display())))
}

fn csv_record<W: std::io::Write>(w: &mut csv::Writer<W>, record: &[String]) -> Result<()> {
    w.write_record(record)
        .map_err(|e| RffGamError::invalid(format!("csv write failed: {e}")))
}

/// Write `pd_feature_<j>.csv` with columns `x, pd`.
pub fn write_pd_csv(dir: &Path, curve: &PdCurve) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("pd_feature_{}.csv", curve.feature));
    let mut w = csv_writer(&path)?;
    csv_record(&mut w, &["x".into(), "pd".into()])?;
    for (x, pd) in curve.x.iter().zip(curve.pd.iter()) {
        csv_record(&mut w, &[x.to_string(), pd.to_string()])?;
    }
    w.flush()
        .map_err(|e| RffGamError::invalid(format!("csv flush failed: {e}")))?;
    Ok(path)
}

/// Write `grid_rmse.csv` with columns `l, d, rmse`; failed cells leave the
/// rmse field empty.
pub fn write_grid_csv(dir: &Path, grid: &GridResult) -> Result<std::path::PathBuf> {
    let path = dir.join("grid_rmse.csv");
    let mut w = csv_writer(&path)?;
    csv_record(&mut w, &["l".into(), "d".into(), "rmse".into()])?;
    for (i, &l) in grid.l_values.iter().enumerate() {
        for (j, &d) in grid.d_values.iter().enumerate() {
            let cell = grid.rmse[i][j].map_or(String::new(), |v| v.to_string());
            csv_record(&mut w, &[l.to_string(), d.to_string(), cell])?;
        }
    }
    w.flush()
        .map_err(|e| RffGamError::invalid(format!("csv flush failed: {e}")))?;
    Ok(path)
}

/// Write `responsibility_profile.csv` with columns
/// `category, count, gamma_0, …, gamma_{L-1}`.
pub fn write_profile_csv(
    dir: &Path,
    profile: &ResponsibilityProfile,
) -> Result<std::path::PathBuf> {
    let path = dir.join("responsibility_profile.csv");
    let mut w = csv_writer(&path)?;
    let l = profile.profile.ncols();
    let mut header = vec!["category".to_string(), "count".to_string()];
    header.extend((0..l).map(|c| format!("gamma_{c}")));
    csv_record(&mut w, &header)?;
    for (row, &cat) in profile.categories.iter().enumerate() {
        let mut rec = vec![cat.to_string(), profile.counts[row].to_string()];
        rec.extend((0..l).map(|c| profile.profile[[row, c]].to_string()));
        csv_record(&mut w, &rec)?;
    }
    w.flush()
        .map_err(|e| RffGamError::invalid(format!("csv flush failed: {e}")))?;
    Ok(path)
}

/// Write `clusters_spatial.csv` with columns `cluster, row, coord_0, coord_1`.
pub fn write_spatial_csv(dir: &Path, groups: &[SpatialGroup]) -> Result<std::path::PathBuf> {
    let path = dir.join("clusters_spatial.csv");
    let mut w = csv_writer(&path)?;
    csv_record(
        &mut w,
        &["cluster".into(), "row".into(), "coord_0".into(), "coord_1".into()],
    )?;
    for group in groups {
        for (&row, &(a, b)) in group.rows.iter().zip(group.coords.iter()) {
            csv_record(
                &mut w,
                &[
                    group.cluster.to_string(),
                    row.to_string(),
                    a.to_string(),
                    b.to_string(),
                ],
            )?;
        }
    }
    w.flush()
        .map_err(|e| RffGamError::invalid(format!("csv flush failed: {e}")))?;
    Ok(path)
}

/// Write `report.csv`: one header row and one value row.
pub fn write_report_csv(dir: &Path, report: &EvalReport) -> Result<std::path::PathBuf> {
    let path = dir.join("report.csv");
    let mut w = csv_writer(&path)?;
    csv_record(
        &mut w,
        &[
            "protocol".into(),
            "train_rmse".into(),
            "test_rmse".into(),
            "ci_low".into(),
            "ci_high".into(),
            "runtime_seconds".into(),
            "k".into(),
            "sigma".into(),
            "lambda".into(),
            "delta".into(),
            "resample_iters".into(),
            "d".into(),
            "l".into(),
            "n_knots".into(),
            "degree".into(),
            "smooth_lambda".into(),
            "seed".into(),
            "ablation_mode".into(),
        ],
    )?;
    let c = &report.config;
    csv_record(
        &mut w,
        &[
            report.protocol.clone(),
            report.train_rmse.to_string(),
            report.test_rmse.to_string(),
            report.ci_low.to_string(),
            report.ci_high.to_string(),
            report.runtime_seconds.to_string(),
            c.k.to_string(),
            c.sigma.to_string(),
            c.lambda.to_string(),
            c.delta.to_string(),
            c.resample_iters.to_string(),
            c.d.to_string(),
            c.l.to_string(),
            c.n_knots.to_string(),
            c.degree.to_string(),
            c.smooth_lambda.to_string(),
            c.seed.to_string(),
            c.ablation_mode.to_string(),
        ],
    )?;
    w.flush()
        .map_err(|e| RffGamError::invalid(format!("csv flush failed: {e}")))?;
    Ok(path)
}
