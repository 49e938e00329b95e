//! End-to-end training pipeline and the blended mixture-of-GAMs predictor.
//!
//! Training runs in three stages: (1) a random Fourier feature regression
//! whose frequencies are refined by resampling on a fit/validation split and
//! whose coefficients are then refit on the complete training set; (2) PCA
//! of the coefficient-weighted feature matrix followed by a Gaussian mixture
//! model in the latent space; (3) one local additive model per mixture
//! component, fitted on the component's hard-assigned rows using all
//! original features. Prediction blends the local models with the soft
//! responsibilities of each input's latent coordinates.
//!
//! Ablation modes swap out parts of the pipeline: clustering directly on
//! standardized inputs (`raw_cluster`), clustering on a PCA of the
//! standardized inputs (`pca_input_cluster`), or ridge-regularized linear
//! local models in place of the additive ones (`local_linear`).

use std::path::Path;
use std::str::FromStr;

use ndarray::prelude::*;

use crate::dataset::{fit_val_split, TabularDataset};
use crate::error::{Result, RffGamError};
use crate::gam::{fit_gam, BasisKind, GamModel, GamOptions, SplineBasis};
use crate::gmm::{fit_em, GmmModel, GmmOptions};
use crate::latent::{fit_pca, LatentProjector};
use crate::linalg::{gram, solve_spd};
use crate::rff::{resample_frequencies, JitterKind, ResampleParams, RffModel};
use crate::serialize::{DocReader, DocWriter, Section};
use crate::standardize::Standardizer;

const MODEL_MAGIC: &str = "rffgam-model";
const SCHEMA_VERSION: u32 = 1;

/// Which pipeline variant to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AblationMode {
    /// The full method.
    #[default]
    None,
    /// Cluster on standardized inputs directly (no RFF/PCA for clustering).
    RawCluster,
    /// Cluster on a PCA of the standardized inputs at dimension d.
    PcaInputCluster,
    /// RFF-based clustering but ridge linear local models.
    LocalLinear,
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AblationMode::None => "none",
            AblationMode::RawCluster => "raw_cluster",
            AblationMode::PcaInputCluster => "pca_input_cluster",
            AblationMode::LocalLinear => "local_linear",
        };
        f.write_str(s)
    }
}

impl FromStr for AblationMode {
    type Err = RffGamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AblationMode::None),
            "raw_cluster" => Ok(AblationMode::RawCluster),
            "pca_input_cluster" => Ok(AblationMode::PcaInputCluster),
            "local_linear" => Ok(AblationMode::LocalLinear),
            other => Err(RffGamError::Config(format!(
                "unknown ablation mode '{other}' (expected none, raw_cluster, pca_input_cluster, or local_linear)"
            ))),
        }
    }
}

/// Hyperparameters for the full pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Number of random frequencies K.
    pub k: usize,
    /// Frequency scale: ω ~ N(0, σ⁻²I).
    pub sigma: f64,
    /// Tikhonov strength, quoted per fit row.
    pub lambda: f64,
    /// Random-walk step size for the frequency refinement.
    pub delta: f64,
    /// Refinement iterations (0 = keep the initial draw).
    pub resample_iters: usize,
    /// Latent dimension d for the PCA stage.
    pub d: usize,
    /// Number of mixture components L.
    pub l: usize,
    /// Interior knots per additive component.
    pub n_knots: usize,
    /// Spline degree (cubic by default).
    pub degree: usize,
    /// Shared smoothing strength for the local additive fits.
    pub smooth_lambda: f64,
    /// Run seed; all randomized stages derive their streams from it.
    pub seed: u64,
    /// Clusters smaller than this are dropped (None → max(50, 5·p)).
    pub min_cluster_size: Option<usize>,
    pub ablation_mode: AblationMode,
    /// Column indices used for the RFF/clustering stage (None → all).
    pub feature_subset: Option<Vec<usize>>,
    /// Random-walk proposal shape for the frequency refinement.
    pub jitter: JitterKind,
    /// Fraction of the training rows held out for frequency validation.
    pub val_fraction: f64,
    /// Ridge strength for local linear models (local_linear mode only).
    pub ridge_lambda: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 1000,
            sigma: 1.0,
            lambda: 0.1,
            delta: 0.3,
            resample_iters: 20,
            d: 2,
            l: 4,
            n_knots: 10,
            degree: 3,
            smooth_lambda: 1.0,
            seed: 0,
            min_cluster_size: None,
            ablation_mode: AblationMode::None,
            feature_subset: None,
            jitter: JitterKind::Fixed,
            val_fraction: 0.1,
            ridge_lambda: 1e-3,
        }
    }
}

impl PipelineConfig {
    /// Validate against a dataset with `p` features.
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.l == 0 || self.degree == 0 {
            return Err(RffGamError::Config(
                "k, d, l, and degree must all be positive".into(),
            ));
        }
        if self.d > self.k {
            return Err(RffGamError::Config(format!(
                "latent dimension d={} exceeds the number of frequencies k={}",
                self.d, self.k
            )));
        }
        if !(self.sigma > 0.0) || !(self.lambda > 0.0) || !(self.delta > 0.0) {
            return Err(RffGamError::Config(
                "sigma, lambda, and delta must be positive".into(),
            ));
        }
        if !(self.smooth_lambda >= 0.0) || !(self.ridge_lambda >= 0.0) {
            return Err(RffGamError::Config(
                "smoothing and ridge strengths must be non-negative".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(RffGamError::Config(
                "val_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if let Some(cols) = &self.feature_subset {
            if cols.is_empty() {
                return Err(RffGamError::Config("feature_subset must not be empty".into()));
            }
            if let Some(&bad) = cols.iter().find(|&&c| c >= p) {
                return Err(RffGamError::Config(format!(
                    "feature_subset index {bad} out of range for {p} features"
                )));
            }
        }
        match self.ablation_mode {
            AblationMode::PcaInputCluster if self.d > p => Err(RffGamError::Config(format!(
                "pca_input_cluster needs d ≤ p, got d={} with p={p}",
                self.d
            ))),
            _ => Ok(()),
        }
    }

    /// Effective minimum cluster size for `p` features.
    pub fn effective_min_cluster_size(&self, p: usize) -> usize {
        self.min_cluster_size.unwrap_or_else(|| 50.max(5 * p))
    }
}

/// Ridge-regularized linear model on standardized features.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub standardizer: Standardizer,
    pub intercept: f64,
    pub weights: Array1<f64>,
    pub ridge_lambda: f64,
}

/// Fit `y ≈ ȳ + w·x̃` with an ℓ₂ penalty on `w` (x̃ standardized).
pub fn fit_ridge(x: &Array2<f64>, y: &Array1<f64>, ridge_lambda: f64) -> Result<RidgeModel> {
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(RffGamError::invalid("ridge fit needs matching non-empty data"));
    }
    let standardizer = Standardizer::fit(x)?;
    let xs = standardizer.transform(x)?;
    let intercept = y.sum() / y.len() as f64;
    let yc = y.mapv(|v| v - intercept);
    let mut normal = gram(&xs);
    for i in 0..normal.nrows() {
        normal[[i, i]] += ridge_lambda;
    }
    let rhs = xs.t().dot(&yc);
    let weights = solve_spd(&normal, &rhs)?;
    Ok(RidgeModel {
        standardizer,
        intercept,
        weights,
        ridge_lambda,
    })
}

impl RidgeModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        let xs = self.standardizer.transform(x)?;
        Ok(xs.dot(&self.weights) + self.intercept)
    }
}

/// A per-component local regressor.
#[derive(Debug, Clone)]
pub enum LocalModel {
    Gam(GamModel),
    Ridge(RidgeModel),
}

impl LocalModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        match self {
            LocalModel::Gam(m) => m.predict(x),
            LocalModel::Ridge(m) => m.predict(x),
        }
    }
}

/// The trained pipeline.
///
/// `rff`/`projector` are present whenever the clustering stage runs through
/// the Fourier features (the full method and `local_linear`);
/// `cluster_standardizer` replaces them in the input-space ablation modes.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    pub rff: Option<RffModel>,
    pub projector: Option<LatentProjector>,
    pub cluster_standardizer: Option<Standardizer>,
    pub gmm: GmmModel,
    pub locals: Vec<LocalModel>,
    pub config: PipelineConfig,
    /// Cached copy of config.feature_subset for quick prediction dispatch.
    pub feature_subset: Option<Vec<usize>>,
    /// Feature count of the training data (all columns).
    pub n_features: usize,
}

/// Select a subset of columns into a fresh owned matrix.
fn select_columns(x: &Array2<f64>, cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), cols.len()));
    for (j, &c) in cols.iter().enumerate() {
        out.column_mut(j).assign(&x.column(c));
    }
    out
}

/// Train the full pipeline (or an ablation, per `config.ablation_mode`).
pub fn train_pipeline(train: &TabularDataset, config: &PipelineConfig) -> Result<MixtureModel> {
    if train.n_rows() == 0 {
        return Err(RffGamError::invalid("training dataset is empty"));
    }
    config.validate(train.n_features())?;
    match config.ablation_mode {
        AblationMode::None | AblationMode::LocalLinear => {
            let rff = train_stage1(train, config)?;
            train_with_rff(train, config, rff, None)
        }
        AblationMode::RawCluster | AblationMode::PcaInputCluster => {
            train_input_space(train, config)
        }
    }
}

/// Train an ablation variant; `config.ablation_mode` must not be `none`.
pub fn train_ablation(train: &TabularDataset, config: &PipelineConfig) -> Result<MixtureModel> {
    if config.ablation_mode == AblationMode::None {
        return Err(RffGamError::Config(
            "train_ablation requires an ablation mode".into(),
        ));
    }
    train_pipeline(train, config)
}

/// Stage 1 alone: frequency refinement on a fit/validation split of the
/// training rows, then a coefficient refit on the complete training set.
pub fn train_stage1(train: &TabularDataset, config: &PipelineConfig) -> Result<RffModel> {
    config.validate(train.n_features())?;
    let cols = cluster_columns(train, config);
    let x_cluster = select_columns(&train.x, &cols);
    let standardizer = Standardizer::fit(&x_cluster)?;
    let x_std = standardizer.transform(&x_cluster)?;

    let split = fit_val_split(train.n_rows(), 1.0 - config.val_fraction, config.seed)?;
    let take = |idx: &[usize]| -> (Array2<f64>, Array1<f64>) {
        let mut xm = Array2::zeros((idx.len(), x_std.ncols()));
        let mut yv = Array1::zeros(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            xm.row_mut(r).assign(&x_std.row(i));
            yv[r] = train.y[i];
        }
        (xm, yv)
    };
    let (x_fit, y_fit) = take(&split.train);
    let (x_val, y_val) = take(&split.test);

    let params = ResampleParams {
        k: config.k,
        sigma: config.sigma,
        lambda: config.lambda,
        delta: config.delta,
        iters: config.resample_iters,
        jitter: config.jitter,
        seed: config.seed,
    };
    let mut rff = resample_frequencies(&x_fit, &y_fit, &x_val, &y_val, &standardizer, &params)?;
    // Re-estimate β on every training row at the selected frequencies.
    rff.refit(&x_std, &train.y)?;
    Ok(rff)
}

/// Clustering columns for this config (subset or all).
fn cluster_columns(train: &TabularDataset, config: &PipelineConfig) -> Vec<usize> {
    config
        .feature_subset
        .clone()
        .unwrap_or_else(|| (0..train.n_features()).collect())
}

/// The raw (unstandardized) matrix of clustering columns.
pub(crate) fn cluster_feature_matrix(
    train: &TabularDataset,
    config: &PipelineConfig,
) -> Array2<f64> {
    let cols = cluster_columns(train, config);
    select_columns(&train.x, &cols)
}

/// Stages 2–3 given an already-trained stage-1 model. `synthetic_mask`, when
/// present, marks rows to exclude from the local fits (used when augmented
/// rows should inform only the clustering).
pub fn train_with_rff(
    train: &TabularDataset,
    config: &PipelineConfig,
    rff: RffModel,
    synthetic_mask: Option<&[bool]>,
) -> Result<MixtureModel> {
    config.validate(train.n_features())?;
    let x_cluster = cluster_feature_matrix(train, config);
    let s = rff.intermediate_features(&x_cluster)?;
    let projector = fit_pca(&s, config.d)?;
    train_with_rff_parts(train, config, rff, &s, projector, synthetic_mask)
}

/// Stages 2–3 with the intermediate features and projector supplied by the
/// caller. Used by grid search to reuse the stage-1 model and the spectral
/// decomposition across cells; the projector must already have latent
/// dimension `config.d`, and truncating a wider fit yields the same rows the
/// direct fit would produce, so results match a standalone run exactly.
pub(crate) fn train_with_rff_parts(
    train: &TabularDataset,
    config: &PipelineConfig,
    rff: RffModel,
    s: &Array2<f64>,
    projector: LatentProjector,
    synthetic_mask: Option<&[bool]>,
) -> Result<MixtureModel> {
    config.validate(train.n_features())?;
    if projector.latent_dim() != config.d {
        return Err(RffGamError::invalid(
            "projector latent dimension does not match the configuration",
        ));
    }
    if let Some(mask) = synthetic_mask {
        if mask.len() != train.n_rows() {
            return Err(RffGamError::invalid(
                "synthetic mask length must match the dataset",
            ));
        }
    }
    let z = projector.project_rows(s)?;

    let (gmm, assignments) = cluster_and_prune(&z, train, config)?;
    let locals = fit_locals(train, config, gmm.n_components(), &assignments, synthetic_mask)?;

    Ok(MixtureModel {
        rff: Some(rff),
        projector: Some(projector),
        cluster_standardizer: None,
        gmm,
        locals,
        config: config.clone(),
        feature_subset: config.feature_subset.clone(),
        n_features: train.n_features(),
    })
}

/// Input-space clustering ablations (raw_cluster / pca_input_cluster).
fn train_input_space(train: &TabularDataset, config: &PipelineConfig) -> Result<MixtureModel> {
    let standardizer = Standardizer::fit(&train.x)?;
    let x_std = standardizer.transform(&train.x)?;
    let (projector, z) = match config.ablation_mode {
        AblationMode::RawCluster => (None, x_std),
        AblationMode::PcaInputCluster => {
            let proj = fit_pca(&x_std, config.d)?;
            let z = proj.project_rows(&x_std)?;
            (Some(proj), z)
        }
        _ => unreachable!("train_input_space called with an RFF mode"),
    };

    let (gmm, assignments) = cluster_and_prune(&z, train, config)?;
    let locals = fit_locals(train, config, gmm.n_components(), &assignments, None)?;

    Ok(MixtureModel {
        rff: None,
        projector,
        cluster_standardizer: Some(standardizer),
        gmm,
        locals,
        config: config.clone(),
        feature_subset: config.feature_subset.clone(),
        n_features: train.n_features(),
    })
}

/// Fit the GMM, then iteratively drop components whose hard-assigned subset
/// is below the minimum size, renormalizing the weights over survivors.
fn cluster_and_prune(
    z: &Array2<f64>,
    train: &TabularDataset,
    config: &PipelineConfig,
) -> Result<(GmmModel, Vec<usize>)> {
    let min_size = config.effective_min_cluster_size(train.n_features());
    let mut gmm = fit_em(z, config.l, config.seed, &GmmOptions::default())?;
    loop {
        let assignments = gmm.hard_assign(z)?;
        let mut counts = vec![0usize; gmm.n_components()];
        for &a in &assignments {
            counts[a] += 1;
        }
        let keep: Vec<bool> = counts.iter().map(|&c| c >= min_size).collect();
        if keep.iter().all(|&k| k) {
            return Ok((gmm, assignments));
        }
        if !keep.iter().any(|&k| k) {
            return Err(RffGamError::Config(format!(
                "all {} clusters fell below the minimum size {min_size}; \
                 lower l or min_cluster_size",
                gmm.n_components()
            )));
        }
        gmm = gmm.retain_components(&keep)?;
        gmm.log_likelihood = gmm.log_density(z)?.sum();
    }
}

/// Fit one local model per component on its hard-assigned rows.
fn fit_locals(
    train: &TabularDataset,
    config: &PipelineConfig,
    n_components: usize,
    assignments: &[usize],
    synthetic_mask: Option<&[bool]>,
) -> Result<Vec<LocalModel>> {
    let gam_opts = GamOptions {
        n_knots: config.n_knots,
        degree: config.degree,
        smooth_lambda: config.smooth_lambda,
        ..GamOptions::default()
    };
    let mut locals = Vec::with_capacity(n_components);
    for c in 0..n_components {
        let rows: Vec<usize> = assignments
            .iter()
            .enumerate()
            .filter(|&(i, &a)| a == c && synthetic_mask.map_or(true, |m| !m[i]))
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            return Err(RffGamError::Config(format!(
                "component {c} has no rows left for its local fit"
            )));
        }
        let subset = train.select_rows(&rows);
        let local = match config.ablation_mode {
            AblationMode::LocalLinear => {
                LocalModel::Ridge(fit_ridge(&subset.x, &subset.y, config.ridge_lambda)?)
            }
            _ => LocalModel::Gam(fit_gam(&subset.x, &subset.y, &gam_opts)?),
        };
        locals.push(local);
    }
    Ok(locals)
}

impl MixtureModel {
    /// Latent coordinates used for responsibilities, per the trained mode.
    pub fn cluster_latent(&self, x_raw: &Array2<f64>) -> Result<Array2<f64>> {
        if x_raw.ncols() != self.n_features {
            return Err(RffGamError::invalid(format!(
                "expected {} feature columns, got {}",
                self.n_features,
                x_raw.ncols()
            )));
        }
        match self.config.ablation_mode {
            AblationMode::None | AblationMode::LocalLinear => {
                let rff = self
                    .rff
                    .as_ref()
                    .ok_or_else(|| RffGamError::invalid("model is missing its RFF stage"))?;
                let projector = self
                    .projector
                    .as_ref()
                    .ok_or_else(|| RffGamError::invalid("model is missing its projector"))?;
                let cols: Vec<usize> = self
                    .feature_subset
                    .clone()
                    .unwrap_or_else(|| (0..self.n_features).collect());
                let x_cluster = select_columns(x_raw, &cols);
                let s = rff.intermediate_features(&x_cluster)?;
                projector.project_rows(&s)
            }
            AblationMode::RawCluster => {
                let std = self.cluster_standardizer.as_ref().ok_or_else(|| {
                    RffGamError::invalid("model is missing its input standardizer")
                })?;
                std.transform(x_raw)
            }
            AblationMode::PcaInputCluster => {
                let std = self.cluster_standardizer.as_ref().ok_or_else(|| {
                    RffGamError::invalid("model is missing its input standardizer")
                })?;
                let projector = self
                    .projector
                    .as_ref()
                    .ok_or_else(|| RffGamError::invalid("model is missing its projector"))?;
                projector.project_rows(&std.transform(x_raw)?)
            }
        }
    }

    /// Responsibility-weighted blend of the local predictions.
    pub fn predict(&self, x_raw: &Array2<f64>) -> Result<Array1<f64>> {
        let z = self.cluster_latent(x_raw)?;
        let gamma = self.gmm.responsibilities(&z)?;
        let mut out = Array1::zeros(x_raw.nrows());
        for (c, local) in self.locals.iter().enumerate() {
            let pred = local.predict(x_raw)?;
            for i in 0..out.len() {
                out[i] += gamma[[i, c]] * pred[i];
            }
        }
        Ok(out)
    }

    /// Soft responsibilities for raw inputs (used for profiling).
    pub fn responsibilities(&self, x_raw: &Array2<f64>) -> Result<Array2<f64>> {
        let z = self.cluster_latent(x_raw)?;
        self.gmm.responsibilities(&z)
    }
}

/// One cluster's training points in a two-column coordinate space.
#[derive(Debug, Clone)]
pub struct SpatialGroup {
    pub cluster: usize,
    /// Row indices into the dataset.
    pub rows: Vec<usize>,
    /// The two designated coordinates of each row.
    pub coords: Vec<(f64, f64)>,
}

/// Group the training rows by hard cluster assignment, reporting the two
/// designated coordinate columns for plotting.
pub fn spatial_cluster_report(
    model: &MixtureModel,
    data: &TabularDataset,
) -> Result<Vec<SpatialGroup>> {
    let subset = model.feature_subset.as_ref().ok_or_else(|| {
        RffGamError::invalid("spatial report requires a model trained with a feature subset")
    })?;
    if subset.len() != 2 {
        return Err(RffGamError::invalid(format!(
            "spatial report needs exactly two coordinate columns, got {}",
            subset.len()
        )));
    }
    let z = model.cluster_latent(&data.x)?;
    let assignments = model.gmm.hard_assign(&z)?;
    let mut groups: Vec<SpatialGroup> = (0..model.gmm.n_components())
        .map(|c| SpatialGroup {
            cluster: c,
            rows: Vec::new(),
            coords: Vec::new(),
        })
        .collect();
    for (i, &a) in assignments.iter().enumerate() {
        groups[a].rows.push(i);
        groups[a]
            .coords
            .push((data.x[[i, subset[0]]], data.x[[i, subset[1]]]));
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn write_standardizer(w: &mut DocWriter, s: &Standardizer) {
    w.vector("mean", &s.mean);
    w.vector("std", &s.std);
}

fn read_standardizer(sec: &Section) -> Result<Standardizer> {
    Ok(Standardizer {
        mean: sec.vector("mean")?.clone(),
        std: sec.vector("std")?.clone(),
    })
}

/// Render a trained model as its canonical text document.
pub fn model_to_string(model: &MixtureModel) -> String {
    let mut w = DocWriter::new(MODEL_MAGIC, SCHEMA_VERSION);

    w.section("model");
    w.field_u64("n_features", model.n_features as u64);
    w.field_u64("n_locals", model.locals.len() as u64);
    w.field_u64("has_rff", model.rff.is_some() as u64);
    w.field_u64("has_projector", model.projector.is_some() as u64);
    w.field_u64(
        "has_cluster_standardizer",
        model.cluster_standardizer.is_some() as u64,
    );

    let c = &model.config;
    w.section("config");
    w.field_u64("k", c.k as u64);
    w.field_f64("sigma", c.sigma);
    w.field_f64("lambda", c.lambda);
    w.field_f64("delta", c.delta);
    w.field_u64("resample_iters", c.resample_iters as u64);
    w.field_u64("d", c.d as u64);
    w.field_u64("l", c.l as u64);
    w.field_u64("n_knots", c.n_knots as u64);
    w.field_u64("degree", c.degree as u64);
    w.field_f64("smooth_lambda", c.smooth_lambda);
    w.field_u64("seed", c.seed);
    if let Some(m) = c.min_cluster_size {
        w.field_u64("min_cluster_size", m as u64);
    }
    w.field_str("ablation_mode", &c.ablation_mode.to_string());
    if let Some(cols) = &c.feature_subset {
        let v: Vec<f64> = cols.iter().map(|&c| c as f64).collect();
        w.vector("feature_subset", &v);
    }
    w.field_str("jitter", c.jitter.as_str());
    w.field_f64("val_fraction", c.val_fraction);
    w.field_f64("ridge_lambda", c.ridge_lambda);

    if let Some(rff) = &model.rff {
        w.section("rff");
        w.field_f64("sigma", rff.sigma);
        w.field_f64("lambda", rff.lambda);
        w.field_f64("y_mean", rff.y_mean);
        write_standardizer(&mut w, &rff.standardizer);
        w.matrix("omega", &rff.omega);
        w.complex_vector("beta", &rff.beta);
    }
    if let Some(proj) = &model.projector {
        w.section("projector");
        w.vector("s_mean", proj.s_mean.as_slice().unwrap());
        w.vector("singular_values", proj.singular_values.as_slice().unwrap());
        w.matrix("v_d", &proj.v_d);
    }
    if let Some(std) = &model.cluster_standardizer {
        w.section("cluster_standardizer");
        write_standardizer(&mut w, std);
    }

    w.section("gmm");
    w.field_u64("n_components", model.gmm.n_components() as u64);
    w.field_u64("latent_dim", model.gmm.latent_dim() as u64);
    w.field_f64("log_likelihood", model.gmm.log_likelihood);
    w.field_u64("n_iter", model.gmm.n_iter as u64);
    w.field_u64("converged", model.gmm.converged as u64);
    w.vector("weights", model.gmm.weights.as_slice().unwrap());
    w.matrix("means", &model.gmm.means);
    for (i, cov) in model.gmm.covariances.iter().enumerate() {
        w.matrix(&format!("cov.{i}"), cov);
    }

    for (i, local) in model.locals.iter().enumerate() {
        match local {
            LocalModel::Gam(g) => {
                w.section(&format!("local.{i}"));
                w.field_str("kind", "gam");
                w.field_f64("alpha", g.alpha);
                w.field_f64("smooth_lambda", g.smooth_lambda);
                w.field_u64("converged", g.converged as u64);
                w.field_u64("sweeps_used", g.sweeps_used as u64);
                w.field_u64("n_components", g.bases.len() as u64);
                for (j, (basis, theta)) in g.bases.iter().zip(g.coefficients.iter()).enumerate() {
                    w.section(&format!("local.{i}.basis.{j}"));
                    w.field_u64("feature_index", basis.feature_index as u64);
                    let kind = match basis.kind {
                        BasisKind::Spline => "spline",
                        BasisKind::Linear => "linear",
                        BasisKind::Constant => "constant",
                    };
                    w.field_str("kind", kind);
                    w.field_u64("degree", basis.degree as u64);
                    w.field_f64("boundary_lo", basis.boundary.0);
                    w.field_f64("boundary_hi", basis.boundary.1);
                    w.vector("interior_knots", &basis.interior_knots);
                    w.vector("coefficients", theta.as_slice().unwrap());
                }
            }
            LocalModel::Ridge(r) => {
                w.section(&format!("local.{i}"));
                w.field_str("kind", "ridge");
                w.field_f64("intercept", r.intercept);
                w.field_f64("ridge_lambda", r.ridge_lambda);
                w.vector("weights", r.weights.as_slice().unwrap());
                write_standardizer(&mut w, &r.standardizer);
            }
        }
    }

    w.finish()
}

/// Parse a model document produced by [`model_to_string`].
pub fn model_from_string(text: &str) -> Result<MixtureModel> {
    let doc = DocReader::parse(text)?;
    if doc.magic != MODEL_MAGIC {
        return Err(RffGamError::Parse(format!(
            "not a model document (magic '{}')",
            doc.magic
        )));
    }
    if doc.schema_version != SCHEMA_VERSION {
        return Err(RffGamError::Parse(format!(
            "unsupported schema version {}",
            doc.schema_version
        )));
    }

    let meta = doc.section("model")?;
    let n_features = meta.u64_field("n_features")? as usize;
    let n_locals = meta.u64_field("n_locals")? as usize;

    let cs = doc.section("config")?;
    let config = PipelineConfig {
        k: cs.u64_field("k")? as usize,
        sigma: cs.f64_field("sigma")?,
        lambda: cs.f64_field("lambda")?,
        delta: cs.f64_field("delta")?,
        resample_iters: cs.u64_field("resample_iters")? as usize,
        d: cs.u64_field("d")? as usize,
        l: cs.u64_field("l")? as usize,
        n_knots: cs.u64_field("n_knots")? as usize,
        degree: cs.u64_field("degree")? as usize,
        smooth_lambda: cs.f64_field("smooth_lambda")?,
        seed: cs.u64_field("seed")?,
        min_cluster_size: match cs.fields.get("min_cluster_size") {
            Some(v) => Some(v.parse().map_err(|_| {
                RffGamError::Parse("min_cluster_size is not an integer".into())
            })?),
            None => None,
        },
        ablation_mode: cs.str_field("ablation_mode")?.parse()?,
        feature_subset: cs
            .vectors
            .get("feature_subset")
            .map(|v| v.iter().map(|&x| x as usize).collect()),
        jitter: cs.str_field("jitter")?.parse()?,
        val_fraction: cs.f64_field("val_fraction")?,
        ridge_lambda: cs.f64_field("ridge_lambda")?,
    };

    let rff = if doc.has_section("rff") {
        let s = doc.section("rff")?;
        Some(RffModel {
            omega: s.matrix("omega")?.clone(),
            beta: s.complex_vector("beta")?.clone(),
            sigma: s.f64_field("sigma")?,
            lambda: s.f64_field("lambda")?,
            standardizer: read_standardizer(s)?,
            y_mean: s.f64_field("y_mean")?,
        })
    } else {
        None
    };

    let projector = if doc.has_section("projector") {
        let s = doc.section("projector")?;
        Some(LatentProjector {
            s_mean: Array1::from_vec(s.vector("s_mean")?.clone()),
            v_d: s.matrix("v_d")?.clone(),
            singular_values: Array1::from_vec(s.vector("singular_values")?.clone()),
        })
    } else {
        None
    };

    let cluster_standardizer = if doc.has_section("cluster_standardizer") {
        Some(read_standardizer(doc.section("cluster_standardizer")?)?)
    } else {
        None
    };

    let gs = doc.section("gmm")?;
    let n_components = gs.u64_field("n_components")? as usize;
    let mut covariances = Vec::with_capacity(n_components);
    for i in 0..n_components {
        covariances.push(gs.matrix(&format!("cov.{i}"))?.clone());
    }
    let gmm = GmmModel {
        weights: Array1::from_vec(gs.vector("weights")?.clone()),
        means: gs.matrix("means")?.clone(),
        covariances,
        log_likelihood: gs.f64_field("log_likelihood")?,
        n_iter: gs.u64_field("n_iter")? as usize,
        converged: gs.u64_field("converged")? != 0,
    };
    if gmm.weights.len() != n_components || gmm.means.nrows() != n_components {
        return Err(RffGamError::Parse("inconsistent mixture component count".into()));
    }

    let mut locals = Vec::with_capacity(n_locals);
    for i in 0..n_locals {
        let ls = doc.section(&format!("local.{i}"))?;
        match ls.str_field("kind")? {
            "gam" => {
                let n_comp = ls.u64_field("n_components")? as usize;
                let mut bases = Vec::with_capacity(n_comp);
                let mut coefficients = Vec::with_capacity(n_comp);
                for j in 0..n_comp {
                    let bs = doc.section(&format!("local.{i}.basis.{j}"))?;
                    let kind = match bs.str_field("kind")? {
                        "spline" => BasisKind::Spline,
                        "linear" => BasisKind::Linear,
                        "constant" => BasisKind::Constant,
                        other => {
                            return Err(RffGamError::Parse(format!(
                                "unknown basis kind '{other}'"
                            )))
                        }
                    };
                    bases.push(SplineBasis {
                        feature_index: bs.u64_field("feature_index")? as usize,
                        kind,
                        interior_knots: bs.vector("interior_knots")?.clone(),
                        boundary: (bs.f64_field("boundary_lo")?, bs.f64_field("boundary_hi")?),
                        degree: bs.u64_field("degree")? as usize,
                    });
                    coefficients.push(Array1::from_vec(bs.vector("coefficients")?.clone()));
                }
                locals.push(LocalModel::Gam(GamModel {
                    alpha: ls.f64_field("alpha")?,
                    bases,
                    coefficients,
                    smooth_lambda: ls.f64_field("smooth_lambda")?,
                    converged: ls.u64_field("converged")? != 0,
                    sweeps_used: ls.u64_field("sweeps_used")? as usize,
                }));
            }
            "ridge" => {
                locals.push(LocalModel::Ridge(RidgeModel {
                    standardizer: read_standardizer(ls)?,
                    intercept: ls.f64_field("intercept")?,
                    weights: Array1::from_vec(ls.vector("weights")?.clone()),
                    ridge_lambda: ls.f64_field("ridge_lambda")?,
                }));
            }
            other => {
                return Err(RffGamError::Parse(format!(
                    "unknown local model kind '{other}'"
                )))
            }
        }
    }
    if locals.len() != gmm.n_components() {
        return Err(RffGamError::Parse(
            "local model count does not match mixture components".into(),
        ));
    }

    Ok(MixtureModel {
        rff,
        projector,
        cluster_standardizer,
        gmm,
        locals,
        feature_subset: config.feature_subset.clone(),
        n_features,
        config,
    })
}

/// Write a model file.
pub fn save_model(model: &MixtureModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

/// Read a model file.
pub fn load_model(path: &Path) -> Result<MixtureModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RffGamError::Parse(format!("cannot read {}: {e}", path.display())))?;
    model_from_string(&text)
}
