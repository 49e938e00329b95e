//! Run-configuration files for the command-line interface.
//!
//! A run configuration is a flat TOML document naming the dataset and the
//! target column, optionally restricting the RFF/clustering stage to named
//! feature columns, and overriding any pipeline, evaluation, or augmentation
//! parameter. Unknown keys are rejected so typos cannot silently fall back
//! to defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::augment::AugmentConfig;
use crate::dataset::TabularDataset;
use crate::error::{Result, RffGamError};
use crate::mixture::{AblationMode, PipelineConfig};
use crate::rff::JitterKind;

/// Raw deserialization target mirroring [`PipelineConfig`] plus dataset
/// plumbing and the evaluation/augmentation knobs. Every pipeline field is
/// optional; omitted keys inherit the library defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    /// Path to the dataset CSV (relative paths resolve against the config
    /// file's directory).
    pub dataset: PathBuf,
    /// Name of the target column.
    pub target: String,
    /// Directory for artifacts (model, reports); default `.`.
    pub output_dir: Option<PathBuf>,
    /// CSV field delimiter; single character, default `,`.
    pub delimiter: Option<String>,
    /// Feature column names for the RFF/clustering stage (e.g. the two
    /// spatial coordinates); omitted → all feature columns.
    pub feature_subset: Option<Vec<String>>,
    /// Train fraction of the train/test split; default 0.8.
    pub train_fraction: Option<f64>,

    // Pipeline parameters (see PipelineConfig for semantics).
    pub k: Option<usize>,
    pub sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub resample_iters: Option<usize>,
    pub d: Option<usize>,
    pub l: Option<usize>,
    pub n_knots: Option<usize>,
    pub degree: Option<usize>,
    pub smooth_lambda: Option<f64>,
    pub seed: Option<u64>,
    pub min_cluster_size: Option<usize>,
    pub ablation_mode: Option<String>,
    pub jitter: Option<String>,
    pub val_fraction: Option<f64>,
    pub ridge_lambda: Option<f64>,

    // Augmentation (the `augment` subcommand).
    pub augment_per_point: Option<usize>,
    pub augment_epsilon: Option<f64>,
    pub augment_chi2_quantile: Option<f64>,
    pub augment_synthetic_in_locals: Option<bool>,

    // Evaluation.
    pub bootstrap_samples: Option<usize>,
    pub ci_level: Option<f64>,
    pub mc_repeats: Option<usize>,

    // Grid-search ranges (the `grid` subcommand).
    pub grid_l: Option<Vec<usize>>,
    pub grid_d: Option<Vec<usize>>,
}

/// A validated run configuration with defaults resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub target: String,
    pub output_dir: PathBuf,
    pub delimiter: u8,
    pub feature_subset: Option<Vec<String>>,
    pub train_fraction: f64,
    /// Pipeline parameters with the feature subset still unresolved
    /// (column names cannot be mapped to indices until the dataset header
    /// has been read; see [`RunConfig::pipeline_for`]).
    pub pipeline: PipelineConfig,
    pub augment_per_point: usize,
    pub augment_epsilon: f64,
    pub augment_chi2_quantile: f64,
    pub augment_synthetic_in_locals: bool,
    pub bootstrap_samples: usize,
    pub ci_level: f64,
    pub mc_repeats: usize,
    pub grid_l: Vec<usize>,
    pub grid_d: Vec<usize>,
}

impl RunConfig {
    /// Read and validate a TOML run configuration.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            RffGamError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let raw: RunConfigFile = toml::from_str(&text)
            .map_err(|e| RffGamError::Parse(format!("config {}: {e}", path.display())))?;
        RunConfig::from_raw(raw, path.parent().unwrap_or(Path::new(".")))
    }

    fn from_raw(raw: RunConfigFile, base: &Path) -> Result<RunConfig> {
        if raw.target.trim().is_empty() {
            return Err(RffGamError::Config("target column name is empty".into()));
        }
        let delimiter = match raw.delimiter.as_deref() {
            None => b',',
            Some(s) if s.len() == 1 => s.as_bytes()[0],
            Some(other) => {
                return Err(RffGamError::Config(format!(
                    "delimiter must be a single character, got {other:?}"
                )))
            }
        };
        let train_fraction = raw.train_fraction.unwrap_or(0.8);
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(RffGamError::Config(
                "train_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        let defaults = PipelineConfig::default();
        let pipeline = PipelineConfig {
            k: raw.k.unwrap_or(defaults.k),
            sigma: raw.sigma.unwrap_or(defaults.sigma),
            lambda: raw.lambda.unwrap_or(defaults.lambda),
            delta: raw.delta.unwrap_or(defaults.delta),
            resample_iters: raw.resample_iters.unwrap_or(defaults.resample_iters),
            d: raw.d.unwrap_or(defaults.d),
            l: raw.l.unwrap_or(defaults.l),
            n_knots: raw.n_knots.unwrap_or(defaults.n_knots),
            degree: raw.degree.unwrap_or(defaults.degree),
            smooth_lambda: raw.smooth_lambda.unwrap_or(defaults.smooth_lambda),
            seed: raw.seed.unwrap_or(defaults.seed),
            min_cluster_size: raw.min_cluster_size,
            ablation_mode: match raw.ablation_mode.as_deref() {
                None => AblationMode::None,
                Some(s) => s.parse()?,
            },
            feature_subset: None, // resolved against the dataset header later
            jitter: match raw.jitter.as_deref() {
                None => defaults.jitter,
                Some(s) => s.parse()?,
            },
            val_fraction: raw.val_fraction.unwrap_or(defaults.val_fraction),
            ridge_lambda: raw.ridge_lambda.unwrap_or(defaults.ridge_lambda),
        };
        let augment_defaults = AugmentConfig::default();
        let config = RunConfig {
            dataset: if raw.dataset.is_absolute() {
                raw.dataset
            } else {
                base.join(raw.dataset)
            },
            target: raw.target,
            output_dir: match raw.output_dir {
                Some(dir) if dir.is_absolute() => dir,
                Some(dir) => base.join(dir),
                None => PathBuf::from("."),
            },
            delimiter,
            feature_subset: raw.feature_subset,
            train_fraction,
            pipeline,
            augment_per_point: raw.augment_per_point.unwrap_or(augment_defaults.n_per_point),
            augment_epsilon: raw.augment_epsilon.unwrap_or(augment_defaults.epsilon),
            augment_chi2_quantile: raw
                .augment_chi2_quantile
                .unwrap_or(augment_defaults.chi2_quantile),
            augment_synthetic_in_locals: raw
                .augment_synthetic_in_locals
                .unwrap_or(augment_defaults.synthetic_in_locals),
            bootstrap_samples: raw.bootstrap_samples.unwrap_or(1000),
            ci_level: raw.ci_level.unwrap_or(0.95),
            mc_repeats: raw.mc_repeats.unwrap_or(10),
            grid_l: raw.grid_l.unwrap_or_else(|| vec![3, 4, 5, 6, 7, 8]),
            grid_d: raw.grid_d.unwrap_or_else(|| vec![2, 3, 4, 5, 6, 7, 8]),
        };
        if let Some(subset) = &config.feature_subset {
            if subset.is_empty() {
                return Err(RffGamError::Config("feature_subset must not be empty".into()));
            }
        }
        if config.bootstrap_samples < 2 {
            return Err(RffGamError::Config("bootstrap_samples must be ≥ 2".into()));
        }
        if !(config.ci_level > 0.0 && config.ci_level < 1.0) {
            return Err(RffGamError::Config(
                "ci_level must lie strictly between 0 and 1".into(),
            ));
        }
        if config.grid_l.is_empty() || config.grid_d.is_empty() {
            return Err(RffGamError::Config("grid ranges must not be empty".into()));
        }
        Ok(config)
    }

    /// Pipeline configuration with the feature-subset names resolved to
    /// column indices of `data`.
    pub fn pipeline_for(&self, data: &TabularDataset) -> Result<PipelineConfig> {
        let mut config = self.pipeline.clone();
        if let Some(names) = &self.feature_subset {
            config.feature_subset = Some(data.feature_indices(names)?);
        }
        Ok(config)
    }

    /// Augmentation settings, seeded from the pipeline seed.
    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            n_per_point: self.augment_per_point,
            epsilon: self.augment_epsilon,
            chi2_quantile: self.augment_chi2_quantile,
            seed: self.pipeline.seed,
            synthetic_in_locals: self.augment_synthetic_in_locals,
        }
    }
}

/// Parse a jitter kind out of config text (re-exported convenience).
pub fn parse_jitter(s: &str) -> Result<JitterKind> {
    s.parse()
}
