use std::path::Path;

use super::trial::csv_error;
use crate::error::{Error, Result};

/// One analysis window's feature vector. `class` is zero-based in memory and
/// written one-based to feature files.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub class: usize,
    pub trial_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
    pub feature_names: Vec<String>,
    pub n_classes: usize,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, n_classes: usize) -> Self {
        Self {
            rows: Vec::new(),
            feature_names,
            n_classes,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, values: Vec<f64>, class: usize, trial_id: u64) -> Result<()> {
        if values.len() != self.n_features() {
            return Err(Error::Data(format!(
                "feature row has {} values, matrix declares {}",
                values.len(),
                self.n_features()
            )));
        }
        if class >= self.n_classes {
            return Err(Error::Data(format!(
                "class label {} outside 1..={}",
                class + 1,
                self.n_classes
            )));
        }
        self.rows.push(FeatureRow {
            values,
            class,
            trial_id,
        });
        Ok(())
    }

    /// Rows whose trial id satisfies `keep`, preserving order.
    pub fn filter_trials(&self, mut keep: impl FnMut(u64) -> bool) -> Self {
        Self {
            rows: self.rows.iter().filter(|r| keep(r.trial_id)).cloned().collect(),
            feature_names: self.feature_names.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Values of feature `j` over all rows.
    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r.values[j])
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for r in &self.rows {
            counts[r.class] += 1;
        }
        counts
    }
}

/// Writes `f_1,...,f_m,label,trial_id`. Floats use the shortest decimal form
/// that reads back to the same double.
pub fn save_features(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    write_features(matrix, &mut writer).map_err(|e| csv_error(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

fn write_features<W: std::io::Write>(
    matrix: &FeatureMatrix,
    writer: &mut csv::Writer<W>,
) -> Result<(), csv::Error> {
    let mut header: Vec<&str> = matrix.feature_names.iter().map(String::as_str).collect();
    header.extend(["label", "trial_id"]);
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for row in &matrix.rows {
        record.clear();
        record.extend(row.values.iter().map(|v| v.to_string()));
        record.push((row.class + 1).to_string());
        record.push(row.trial_id.to_string());
        writer.write_record(&record)?;
    }
    Ok(())
}

pub fn load_features(path: &Path, n_classes: usize) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let width = header.len();
    if width < 2 || header[width - 2] != "label" || header[width - 1] != "trial_id" {
        return Err(Error::parse(
            path,
            1,
            0,
            "header must end with \"label,trial_id\"",
        ));
    }
    let mut matrix = FeatureMatrix::new(header[..width - 2].to_vec(), n_classes);

    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != width {
            return Err(Error::parse(
                path,
                line,
                record.len().min(width) + 1,
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        let mut values = Vec::with_capacity(width - 2);
        for (col, cell) in record.iter().take(width - 2).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(path, line, col + 1, format!("non-numeric value \"{cell}\""))
            })?;
            values.push(v);
        }
        let label: usize = record[width - 2].parse().map_err(|_| {
            Error::parse(path, line, width - 1, format!("bad label \"{}\"", &record[width - 2]))
        })?;
        if label == 0 || label > n_classes {
            return Err(Error::parse(
                path,
                line,
                width - 1,
                format!("label {label} outside 1..={n_classes}"),
            ));
        }
        let trial_id: u64 = record[width - 1].parse().map_err(|_| {
            Error::parse(path, line, width, format!("bad trial id \"{}\"", &record[width - 1]))
        })?;
        matrix.rows.push(FeatureRow {
            values,
            class: label - 1,
            trial_id,
        });
    }
    Ok(matrix)
}
