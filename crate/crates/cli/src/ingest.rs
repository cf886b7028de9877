//! CSV ingestion, train/test split and synthetic dataset output.

use std::path::Path;

use predmult::{oversample_minority, Dataset, Example, Label};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// A data row left out of the dataset. Rows are numbered from 1, counting
/// data rows only (the header is not a row).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedRow {
    pub row: usize,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: Vec<DroppedRow>,
    pub feature_columns: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Class weights `(positive, negative)` of the training split before and
    /// after oversampling.
    pub train_class_weights: (u64, u64),
    pub oversampled_class_weights: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub train: Dataset,
    /// Untouched held-out split; `None` when there is none.
    pub test: Option<Dataset>,
    pub report: IngestReport,
}

fn cell_value(text: &str) -> Option<f64> {
    text.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed CSV, drops rows with missing or non-numeric cells, maps
/// 0/1 labels to -1/+1, splits with a seeded shuffle and oversamples the
/// training split.
pub fn ingest_csv(path: &Path, config: &RunConfig) -> Result<Ingested, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Input(format!("bad header in {}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("column `{name}` not found in {}", path.display())))
    };
    let label_col = find(&config.label_column)?;
    let group_col = config.group_column.as_deref().map(find).transpose()?;
    let feature_cols: Vec<usize> = match &config.feature_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_, _>>()?,
        None => (0..headers.len())
            .filter(|&c| c != label_col && Some(c) != group_col)
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(CliError::Input("no feature columns".into()));
    }

    let mut examples = Vec::new();
    let mut dropped = Vec::new();
    let mut bad_labels = Vec::new();
    let mut rows_read = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        rows_read += 1;
        let record = record.map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        let drop = |column: usize, reason: &str| DroppedRow {
            row,
            column: headers[column].clone(),
            reason: reason.to_string(),
        };
        let label_text = record.get(label_col).unwrap_or("").trim();
        let label = match cell_value(label_text) {
            None => {
                let reason = if label_text.is_empty() { "missing" } else { "not numeric" };
                dropped.push(drop(label_col, reason));
                continue;
            }
            Some(v) if v == 1.0 => Label::Positive,
            Some(v) if v == 0.0 || v == -1.0 => Label::Negative,
            Some(_) => {
                bad_labels.push(row);
                continue;
            }
        };
        let mut raw = Vec::with_capacity(feature_cols.len());
        let mut missing = None;
        for &c in &feature_cols {
            let text = record.get(c).unwrap_or("");
            match cell_value(text) {
                Some(v) => raw.push(v),
                None => {
                    let reason = if text.trim().is_empty() { "missing" } else { "not numeric" };
                    missing = Some(drop(c, reason));
                    break;
                }
            }
        }
        if let Some(d) = missing {
            dropped.push(d);
            continue;
        }
        let mut example = Example::from_raw(&raw, label);
        if let Some(g) = group_col {
            let group = record.get(g).unwrap_or("").trim();
            if group.is_empty() {
                dropped.push(drop(g, "missing"));
                continue;
            }
            example = example.with_group(group);
        }
        examples.push(example);
    }
    if !bad_labels.is_empty() {
        let rows: Vec<String> = bad_labels.iter().map(|r| r.to_string()).collect();
        return Err(CliError::Input(format!(
            "label column `{}` must hold -1/+1 or 0/1; offending rows: {}",
            config.label_column,
            rows.join(", ")
        )));
    }
    if examples.is_empty() {
        return Err(CliError::Input(format!(
            "no rows left after dropping {} incomplete rows",
            dropped.len()
        )));
    }
    for d in &dropped {
        log::info!("dropped row {} ({}: {})", d.row, d.column, d.reason);
    }

    let rows_kept = examples.len();
    let (train_idx, test_idx) = split_indices(rows_kept, config.split_fraction, config.split_seed);
    let pick = |idx: &[usize]| -> Vec<Example> { idx.iter().map(|&i| examples[i].clone()).collect() };
    let train = Dataset::new(pick(&train_idx)).map_err(|e| CliError::Input(e.to_string()))?;
    let test = if test_idx.is_empty() {
        None
    } else {
        Some(Dataset::new(pick(&test_idx)).map_err(|e| CliError::Input(e.to_string()))?)
    };
    let train_class_weights = train.class_weights();
    let train = if config.oversample {
        oversample_minority(&train, config.split_seed)
            .map_err(|e| CliError::Input(format!("training split: {e}")))?
    } else {
        train
    };
    let report = IngestReport {
        rows_read,
        rows_kept,
        dropped,
        feature_columns: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        train_rows: train_idx.len(),
        test_rows: test_idx.len(),
        train_class_weights,
        oversampled_class_weights: train.class_weights(),
    };
    Ok(Ingested { train, test, report })
}

/// Seeded shuffle, then the first `round(fraction * n)` rows (at least one,
/// and at most `n - 1` when `n > 1`) go to training. Both parts are returned
/// in ascending row order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut k = ((n as f64) * fraction).round() as usize;
    k = k.clamp(1, n.saturating_sub(1).max(1));
    let (train, test) = order.split_at(k);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Writes one CSV row per unit of weight: `x1..xd,label[,group]`.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let grouped = data.has_groups();
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    if grouped {
        header.push("group".into());
    }
    writer.write_record(&header).map_err(|e| CliError::Io(e.to_string()))?;
    for e in data.examples() {
        let mut record: Vec<String> = e.features()[1..].iter().map(|v| v.to_string()).collect();
        record.push(e.label().sign().to_string());
        if grouped {
            record.push(e.group().unwrap_or_default().to_string());
        }
        for _ in 0..e.weight() {
            writer.write_record(&record).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))
}
