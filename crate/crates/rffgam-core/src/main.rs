//! Command-line front end: training, prediction, evaluation protocols, grid
//! search, partial dependence, perturbation augmentation, frequency
//! analysis, and spatial cluster reports.
//!
//! Exit codes: 0 on success, 2 for usage/configuration/data errors, 3 for
//! numerical failures inside a fit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::prelude::*;

use rffgam_core::augment::augment_dataset;
use rffgam_core::config::RunConfig;
use rffgam_core::dataset::{read_csv, read_features_csv, train_test_split, TabularDataset};
use rffgam_core::error::{Result, RffGamError};
use rffgam_core::eval::{
    bootstrap_ci, grid_search, monte_carlo_cv, partial_dependence, rmse, write_grid_csv,
    write_pd_csv, write_report_csv, write_spatial_csv, EvalReport,
};
use rffgam_core::latent::{scott_bandwidth, weighted_frequency_pca};
use rffgam_core::mixture::{
    load_model, save_model, spatial_cluster_report, train_pipeline, train_stage1, train_with_rff,
    MixtureModel,
};
use rffgam_core::serialize::fmt_f64;

#[derive(Parser)]
#[command(
    name = "rffgam",
    version,
    about = "Cluster-wise additive regression on random Fourier features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the config-driven subcommands.
#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for every randomized stage.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the pipeline; writes model.rffgam and report.csv.
    Train(CommonArgs),
    /// Score a CSV of inputs with a trained model; writes predictions.csv.
    Predict {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Input CSV of feature rows.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional run config; its target column is skipped if present in
        /// the input, and its delimiter is used for parsing.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate without persisting a model; writes report.csv.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// "holdout" (single split + residual bootstrap) or "mc"
        /// (repeated-random-split cross-validation).
        #[arg(long, default_value = "holdout")]
        protocol: String,
    },
    /// Sweep mixture size L and latent dimension d; writes grid_rmse.csv.
    Grid {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated L values (default: config grid_l).
        #[arg(long, value_delimiter = ',')]
        l_values: Option<Vec<usize>>,
        /// Comma-separated d values (default: config grid_d).
        #[arg(long, value_delimiter = ',')]
        d_values: Option<Vec<usize>>,
    },
    /// Partial-dependence curves; writes pd_feature_<j>.csv per feature.
    Pd {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated feature indices (default: all).
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<usize>>,
        /// Number of grid points per curve.
        #[arg(long, default_value_t = 50)]
        grid_size: usize,
    },
    /// Train on a perturbation-augmented training set; writes model.rffgam,
    /// report.csv, and augmented_train.csv.
    Augment(CommonArgs),
    /// Density-weighted PCA of a trained model's frequency sample; writes
    /// frequency_analysis.csv.
    FreqAnalysis {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-cluster training-point lists on the two spatial columns; writes
    /// clusters_spatial.csv.
    SpatialReport {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rffgam: {err}");
            match err {
                RffGamError::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(common) => cmd_train(&common),
        Command::Predict {
            model,
            input,
            out,
            config,
        } => cmd_predict(&model, &input, out.as_deref(), config.as_deref()),
        Command::Eval { common, protocol } => cmd_eval(&common, &protocol),
        Command::Grid {
            common,
            l_values,
            d_values,
        } => cmd_grid(&common, l_values, d_values),
        Command::Pd {
            common,
            model,
            features,
            grid_size,
        } => cmd_pd(&common, &model, features, grid_size),
        Command::Augment(common) => cmd_augment(&common),
        Command::FreqAnalysis { model, out } => cmd_freq_analysis(&model, out.as_deref()),
        Command::SpatialReport { common, model } => cmd_spatial_report(&common, &model),
    }
}

/// Load the config with CLI overrides applied, read the dataset, and create
/// the output directory.
fn prepare(common: &CommonArgs) -> Result<(RunConfig, TabularDataset)> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(dir) = &common.out {
        config.output_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        config.pipeline.seed = seed;
    }
    std::fs::create_dir_all(&config.output_dir)?;
    let data = read_csv(&config.dataset, &config.target, config.delimiter)?;
    println!(
        "dataset {}: kept {} rows of {} read ({} dropped), {} features",
        data.source,
        data.n_rows(),
        data.rows_read,
        data.rows_dropped,
        data.n_features()
    );
    Ok((config, data))
}

fn split_dataset(
    config: &RunConfig,
    data: &TabularDataset,
) -> Result<(TabularDataset, TabularDataset)> {
    let idx = train_test_split(data.n_rows(), config.train_fraction, config.pipeline.seed)?;
    Ok((data.select_rows(&idx.train), data.select_rows(&idx.test)))
}

/// Evaluate a trained model on a split and assemble the report.
fn report_for(
    model: &MixtureModel,
    train: &TabularDataset,
    test: &TabularDataset,
    run: &RunConfig,
    protocol: &str,
    runtime_seconds: f64,
) -> Result<EvalReport> {
    let train_rmse = rmse(&model.predict(&train.x)?, &train.y)?;
    let test_pred = model.predict(&test.x)?;
    let test_rmse = rmse(&test_pred, &test.y)?;
    let residuals = &test_pred - &test.y;
    let (ci_low, ci_high) = bootstrap_ci(
        &residuals,
        run.bootstrap_samples,
        run.ci_level,
        run.pipeline.seed,
    )?;
    Ok(EvalReport {
        protocol: protocol.to_string(),
        train_rmse,
        test_rmse,
        ci_low,
        ci_high,
        runtime_seconds,
        config: model.config.clone(),
    })
}

fn print_report(report: &EvalReport) {
    println!(
        "[{}] train rmse {:.6}, test rmse {:.6}, 95% ci [{:.6}, {:.6}], runtime {:.1}s",
        report.protocol,
        report.train_rmse,
        report.test_rmse,
        report.ci_low,
        report.ci_high,
        report.runtime_seconds
    );
}

fn cmd_train(common: &CommonArgs) -> Result<()> {
    let (run, data) = prepare(common)?;
    let pipeline = run.pipeline_for(&data)?;
    let (train, test) = split_dataset(&run, &data)?;
    println!(
        "training on {} rows, holding out {} ({} mode)",
        train.n_rows(),
        test.n_rows(),
        pipeline.ablation_mode
    );
    let t0 = Instant::now();
    let model = train_pipeline(&train, &pipeline)?;
    let runtime = t0.elapsed().as_secs_f64();
    let report = report_for(&model, &train, &test, &run, "holdout", runtime)?;
    if let Some(rff) = &model.rff {
        let x_test = match &model.config.feature_subset {
            Some(cols) => test.x.select(Axis(1), cols),
            None => test.x.clone(),
        };
        let stage1 = rmse(&rff.predict(&x_test)?, &test.y)?;
        println!("stage-1 fourier rmse {stage1:.6}");
    }
    let model_path = run.output_dir.join("model.rffgam");
    save_model(&model, &model_path)?;
    let report_path = write_report_csv(&run.output_dir, &report)?;
    print_report(&report);
    println!("model -> {}", model_path.display());
    println!("report -> {}", report_path.display());
    Ok(())
}

fn cmd_predict(
    model_path: &Path,
    input: &Path,
    out: Option<&Path>,
    config: Option<&Path>,
) -> Result<()> {
    let model = load_model(model_path)?;
    let (skip, delimiter) = match config {
        Some(path) => {
            let run = RunConfig::load(path)?;
            (Some(run.target), run.delimiter)
        }
        None => (None, b','),
    };
    let (names, x) = read_features_csv(input, skip.as_deref(), delimiter)?;
    if x.ncols() != model.n_features {
        return Err(RffGamError::invalid(format!(
            "model expects {} feature columns, input {} has {} ({})",
            model.n_features,
            input.display(),
            x.ncols(),
            names.join(",")
        )));
    }
    let pred = if x.nrows() == 0 {
        Array1::zeros(0)
    } else {
        model.predict(&x)?
    };
    let out_dir = out.unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;
    let out_path = out_dir.join("predictions.csv");
    let mut body = String::from("prediction\n");
    for v in pred.iter() {
        body.push_str(&fmt_f64(*v));
        body.push('\n');
    }
    std::fs::write(&out_path, body)?;
    println!("{} predictions -> {}", pred.len(), out_path.display());
    Ok(())
}

fn cmd_eval(common: &CommonArgs, protocol: &str) -> Result<()> {
    let (run, data) = prepare(common)?;
    let pipeline = run.pipeline_for(&data)?;
    let report = match protocol {
        "holdout" => {
            let (train, test) = split_dataset(&run, &data)?;
            let t0 = Instant::now();
            let model = train_pipeline(&train, &pipeline)?;
            let runtime = t0.elapsed().as_secs_f64();
            report_for(&model, &train, &test, &run, "holdout", runtime)?
        }
        "mc" => {
            let t0 = Instant::now();
            let cv = monte_carlo_cv(
                &data,
                &pipeline,
                run.mc_repeats,
                run.train_fraction,
                run.pipeline.seed,
            )?;
            for (rep, msg) in &cv.failures {
                eprintln!("warning: repetition {rep} failed: {msg}");
            }
            EvalReport {
                protocol: format!("monte_carlo_cv_{}", run.mc_repeats),
                train_rmse: f64::NAN,
                test_rmse: cv.mean_rmse,
                ci_low: cv.ci_low,
                ci_high: cv.ci_high,
                runtime_seconds: t0.elapsed().as_secs_f64(),
                config: pipeline.clone(),
            }
        }
        other => {
            return Err(RffGamError::Config(format!(
                "unknown protocol '{other}' (expected holdout or mc)"
            )))
        }
    };
    let report_path = write_report_csv(&run.output_dir, &report)?;
    print_report(&report);
    println!("report -> {}", report_path.display());
    Ok(())
}

fn cmd_grid(
    common: &CommonArgs,
    l_values: Option<Vec<usize>>,
    d_values: Option<Vec<usize>>,
) -> Result<()> {
    let (run, data) = prepare(common)?;
    let pipeline = run.pipeline_for(&data)?;
    let l_values = l_values.unwrap_or_else(|| run.grid_l.clone());
    let d_values = d_values.unwrap_or_else(|| run.grid_d.clone());
    let t0 = Instant::now();
    let grid = grid_search(&data, &pipeline, &l_values, &d_values)?;
    for (li, di, msg) in &grid.failures {
        eprintln!(
            "warning: cell (l={}, d={}) failed: {msg}",
            l_values[*li], d_values[*di]
        );
    }
    let path = write_grid_csv(&run.output_dir, &grid)?;
    match grid.best_cell() {
        Some((li, di, value)) => println!(
            "best cell l={} d={} with test rmse {:.6} ({:.1}s)",
            grid.l_values[li],
            grid.d_values[di],
            value,
            t0.elapsed().as_secs_f64()
        ),
        None => println!("no grid cell trained successfully"),
    }
    println!("grid -> {}", path.display());
    Ok(())
}

fn cmd_pd(
    common: &CommonArgs,
    model_path: &Path,
    features: Option<Vec<usize>>,
    grid_size: usize,
) -> Result<()> {
    let (run, data) = prepare(common)?;
    let model = load_model(model_path)?;
    if model.n_features != data.n_features() {
        return Err(RffGamError::invalid(format!(
            "model expects {} features, dataset has {}",
            model.n_features,
            data.n_features()
        )));
    }
    let (train, _) = split_dataset(&run, &data)?;
    let features = features.unwrap_or_else(|| (0..data.n_features()).collect());
    for &j in &features {
        let curve = partial_dependence(|x| model.predict(x), &train.x, j, grid_size)?;
        let path = write_pd_csv(&run.output_dir, &curve)?;
        println!(
            "pd feature {j} ({}) -> {}",
            data.feature_names.get(j).map(String::as_str).unwrap_or("?"),
            path.display()
        );
    }
    Ok(())
}

fn cmd_augment(common: &CommonArgs) -> Result<()> {
    let (run, data) = prepare(common)?;
    let pipeline = run.pipeline_for(&data)?;
    let (train, test) = split_dataset(&run, &data)?;
    let t0 = Instant::now();
    let rff = train_stage1(&train, &pipeline)?;
    let augmented = augment_dataset(&train, &rff, &run.augment_config())?;
    println!(
        "augmentation: {} candidates, {} accepted (threshold {:.4}), {} total rows",
        augmented.n_candidates,
        augmented.n_accepted,
        augmented.threshold,
        augmented.dataset.n_rows()
    );
    let mask = if run.augment_synthetic_in_locals {
        None
    } else {
        Some(augmented.is_synthetic.as_slice())
    };
    let model = train_with_rff(&augmented.dataset, &pipeline, rff, mask)?;
    let runtime = t0.elapsed().as_secs_f64();
    let report = report_for(&model, &train, &test, &run, "augmented-holdout", runtime)?;

    let model_path = run.output_dir.join("model.rffgam");
    save_model(&model, &model_path)?;
    let report_path = write_report_csv(&run.output_dir, &report)?;
    let aug_path = write_augmented_csv(&run.output_dir, &augmented.dataset, &augmented.is_synthetic)?;
    print_report(&report);
    println!("model -> {}", model_path.display());
    println!("report -> {}", report_path.display());
    println!("augmented data -> {}", aug_path.display());
    Ok(())
}

fn write_augmented_csv(
    dir: &Path,
    data: &TabularDataset,
    is_synthetic: &[bool],
) -> Result<PathBuf> {
    let path = dir.join("augmented_train.csv");
    let mut body = String::new();
    for name in &data.feature_names {
        body.push_str(name);
        body.push(',');
    }
    body.push_str(&data.target_name);
    body.push_str(",is_synthetic\n");
    for i in 0..data.n_rows() {
        for j in 0..data.n_features() {
            body.push_str(&fmt_f64(data.x[[i, j]]));
            body.push(',');
        }
        body.push_str(&fmt_f64(data.y[i]));
        body.push(',');
        body.push_str(if is_synthetic[i] { "1" } else { "0" });
        body.push('\n');
    }
    std::fs::write(&path, body)?;
    Ok(path)
}

fn cmd_freq_analysis(model_path: &Path, out: Option<&Path>) -> Result<()> {
    let model = load_model(model_path)?;
    let rff = model.rff.as_ref().ok_or_else(|| {
        RffGamError::invalid(
            "frequency analysis requires a model whose clustering stage used Fourier features",
        )
    })?;
    let bandwidth = scott_bandwidth(&rff.omega);
    let analysis = weighted_frequency_pca(&rff.omega, bandwidth)?;
    let out_dir = out.unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("frequency_analysis.csv");
    let p = analysis.principal_directions.nrows();
    let mut body = String::from("direction,weighted_eigenvalue,kde_bandwidth");
    for j in 0..p {
        body.push_str(&format!(",coord_{j}"));
    }
    body.push('\n');
    for i in 0..analysis.principal_directions.ncols() {
        body.push_str(&format!(
            "{},{},{}",
            i + 1,
            fmt_f64(analysis.weighted_eigenvalues[i]),
            fmt_f64(analysis.kde_bandwidth)
        ));
        for j in 0..p {
            body.push(',');
            body.push_str(&fmt_f64(analysis.principal_directions[[j, i]]));
        }
        body.push('\n');
    }
    std::fs::write(&path, body)?;
    println!(
        "{} directions (bandwidth {:.6}) -> {}",
        analysis.principal_directions.ncols(),
        bandwidth,
        path.display()
    );
    Ok(())
}

fn cmd_spatial_report(common: &CommonArgs, model_path: &Path) -> Result<()> {
    let (run, data) = prepare(common)?;
    let model = load_model(model_path)?;
    let (train, _) = split_dataset(&run, &data)?;
    let groups = spatial_cluster_report(&model, &train)?;
    let path = write_spatial_csv(&run.output_dir, &groups)?;
    for g in &groups {
        println!("cluster {}: {} points", g.cluster, g.rows.len());
    }
    println!("spatial report -> {}", path.display());
    Ok(())
}
