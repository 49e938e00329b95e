//! Scratch benchmark: wall time per resampling iteration at the California
//! problem size (K=4000), to size the iteration budget.

use std::time::Instant;

use rffgam_core::dataset::{read_csv, train_test_split};
use rffgam_core::mixture::{train_stage1, PipelineConfig};
use rffgam_core::rff::JitterKind;

fn main() {
    let data = read_csv(
        std::path::Path::new("data/california/housing.csv"),
        "median_house_value",
        b',',
    )
    .unwrap();
    println!(
        "rows {} (read {}, dropped {}), features {}",
        data.n_rows(),
        data.rows_read,
        data.rows_dropped,
        data.n_features()
    );
    let idx = train_test_split(data.n_rows(), 0.8, 126).unwrap();
    let train = data.select_rows(&idx.train);
    let test = data.select_rows(&idx.test);

    let iters = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3usize);
    let config = PipelineConfig {
        k: 4000,
        sigma: 1.0,
        lambda: 0.32,
        delta: 0.3,
        resample_iters: iters,
        jitter: JitterKind::Covariance,
        val_fraction: 0.1,
        seed: 126,
        ..PipelineConfig::default()
    };
    let t0 = Instant::now();
    let rff = train_stage1(&train, &config).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    println!(
        "stage1 with {iters} iterations: {elapsed:.1}s total, {:.1}s/iter",
        elapsed / (iters as f64 + 1.0)
    );

    let pred = rff.predict(&test.x).unwrap();
    let se: f64 = pred
        .iter()
        .zip(test.y.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    println!(
        "test rmse {:.4}e5",
        (se / test.y.len() as f64).sqrt() / 1e5
    );
}
