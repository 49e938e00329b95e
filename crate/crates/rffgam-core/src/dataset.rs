//! Tabular dataset ingestion and train/test splitting.

use std::path::Path;

use ndarray::prelude::*;
use rand::seq::SliceRandom;

use crate::error::{Result, RffGamError};
use crate::rng::{stream, Stream};

/// A fully numeric dataset: feature matrix plus target vector.
#[derive(Debug, Clone)]
pub struct TabularDataset {
    /// Feature column names, in matrix column order (target excluded).
    pub feature_names: Vec<String>,
    /// Target column name.
    pub target_name: String,
    /// N×p feature matrix.
    pub x: Array2<f64>,
    /// Length-N target vector.
    pub y: Array1<f64>,
    /// Where the data came from.
    pub source: String,
    /// Row accounting from ingestion: rows read from the file.
    pub rows_read: usize,
    /// Rows dropped because a value failed to parse or was missing.
    pub rows_dropped: usize,
}

impl TabularDataset {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Positional indices of the named feature columns.
    pub fn feature_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| {
                        RffGamError::invalid(format!("unknown feature column '{n}'"))
                    })
            })
            .collect()
    }

    /// Select a subset of rows into a new dataset (keeps provenance).
    pub fn select_rows(&self, idx: &[usize]) -> TabularDataset {
        let p = self.n_features();
        let mut x = Array2::zeros((idx.len(), p));
        let mut y = Array1::zeros(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            x.row_mut(r).assign(&self.x.row(i));
            y[r] = self.y[i];
        }
        TabularDataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            x,
            y,
            source: self.source.clone(),
            rows_read: self.rows_read,
            rows_dropped: self.rows_dropped,
        }
    }
}

/// Read a CSV file with a header row into a numeric dataset.
///
/// Rows containing values that are missing or fail to parse as floats are
/// dropped (never imputed); the drop count is recorded on the dataset and it
/// is the caller's job to log it. The target column is removed from the
/// feature matrix.
pub fn read_csv(
    path: &Path,
    target_column: &str,
    delimiter: u8,
) -> Result<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| RffGamError::Parse(format!("cannot open {}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| RffGamError::Parse(format!("bad CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(RffGamError::Parse("empty CSV header".into()));
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            RffGamError::invalid(format!(
                "target column '{target_column}' not found in {}",
                path.display()
            ))
        })?;

    let n_cols = headers.len();
    let mut rows_read = 0usize;
    let mut rows_dropped = 0usize;
    let mut values: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut row_buf: Vec<f64> = Vec::with_capacity(n_cols - 1);

    for record in reader.records() {
        let record =
            record.map_err(|e| RffGamError::Parse(format!("CSV read error: {e}")))?;
        rows_read += 1;
        if record.len() != n_cols {
            rows_dropped += 1;
            continue;
        }
        row_buf.clear();
        let mut target = f64::NAN;
        let mut ok = true;
        for (j, field) in record.iter().enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    if j == target_idx {
                        target = v;
                    } else {
                        row_buf.push(v);
                    }
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            rows_dropped += 1;
            continue;
        }
        values.extend_from_slice(&row_buf);
        targets.push(target);
    }

    let n = targets.len();
    if n == 0 {
        return Err(RffGamError::invalid(format!(
            "no usable rows in {} ({} read, {} dropped)",
            path.display(),
            rows_read,
            rows_dropped
        )));
    }
    let p = n_cols - 1;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let x = Array2::from_shape_vec((n, p), values)
        .map_err(|e| RffGamError::Parse(format!("shape error: {e}")))?;

    Ok(TabularDataset {
        feature_names,
        target_name: target_column.to_string(),
        x,
        y: Array1::from_vec(targets),
        source: path.display().to_string(),
        rows_read,
        rows_dropped,
    })
}

/// Read a prediction-input CSV as a bare feature matrix.
///
/// All columns are features except an optional named column to skip (the
/// training target, when the file happens to carry one). Unlike
/// [`read_csv`], no row is ever dropped: predictions must stay aligned with
/// the input rows, so a missing or unparseable value is an error. A
/// header-only file yields a 0×p matrix.
pub fn read_features_csv(
    path: &Path,
    skip_column: Option<&str>,
    delimiter: u8,
) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| RffGamError::Parse(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| RffGamError::Parse(format!("bad CSV header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(RffGamError::Parse("empty CSV header".into()));
    }
    let skip_idx = skip_column.and_then(|name| headers.iter().position(|h| h == name));
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = names.len();

    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| RffGamError::Parse(format!("CSV read error: {e}")))?;
        if record.len() != headers.len() {
            return Err(RffGamError::Parse(format!(
                "row {} of {} has {} fields, expected {}",
                row_no + 2,
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            if Some(j) == skip_idx {
                continue;
            }
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(RffGamError::Parse(format!(
                        "row {} of {}: column '{}' has non-numeric value {:?}",
                        row_no + 2,
                        path.display(),
                        headers[j],
                        field
                    )))
                }
            }
        }
        n += 1;
    }
    let x = Array2::from_shape_vec((n, p), values)
        .map_err(|e| RffGamError::Parse(format!("shape error: {e}")))?;
    Ok((names, x))
}

/// Deterministic row split: a random permutation of the row indices is cut at
/// `round(train_fraction * n)`.
#[derive(Debug, Clone)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split `n` rows into train/test index sets with the split stream of `seed`.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    split_with_stream(n, train_fraction, seed, Stream::TrainTestSplit)
}

/// Split `n` rows into fit/validation index sets (used inside the frequency
/// search, which holds out part of the training data).
pub fn fit_val_split(n: usize, fit_fraction: f64, seed: u64) -> Result<SplitIndices> {
    split_with_stream(n, fit_fraction, seed, Stream::FitValSplit)
}

fn split_with_stream(
    n: usize,
    first_fraction: f64,
    seed: u64,
    which: Stream,
) -> Result<SplitIndices> {
    if !(0.0..=1.0).contains(&first_fraction) {
        return Err(RffGamError::invalid("split fraction must lie in [0, 1]"));
    }
    if n == 0 {
        return Err(RffGamError::invalid("cannot split zero rows"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, which);
    idx.shuffle(&mut rng);
    let n_first = (first_fraction * n as f64).round() as usize;
    let test = idx.split_off(n_first.min(n));
    Ok(SplitIndices { train: idx, test })
}
