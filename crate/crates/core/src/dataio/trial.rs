use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One recorded (or generated) trial: `samples` has one row per time sample
/// and one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EegTrial {
    pub samples: DMatrix<f64>,
    pub rate_hz: f64,
    pub channel_names: Vec<String>,
    pub target_hz: f64,
    pub trial_id: u64,
}

impl EegTrial {
    pub fn new(
        samples: DMatrix<f64>,
        rate_hz: f64,
        channel_names: Vec<String>,
        target_hz: f64,
        trial_id: u64,
    ) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Data(format!("sampling rate must be positive, got {rate_hz}")));
        }
        if !(target_hz.is_finite() && target_hz > 0.0) {
            return Err(Error::Data(format!("target frequency must be positive, got {target_hz}")));
        }
        if samples.ncols() == 0 {
            return Err(Error::Data(format!("trial {trial_id} has no channels")));
        }
        if channel_names.len() != samples.ncols() {
            return Err(Error::Data(format!(
                "trial {trial_id}: {} channel names for {} columns",
                channel_names.len(),
                samples.ncols()
            )));
        }
        if (samples.nrows() as f64) < rate_hz {
            return Err(Error::Data(format!(
                "trial {trial_id} holds {} samples, less than one second at {rate_hz} Hz",
                samples.nrows()
            )));
        }
        Ok(Self {
            samples,
            rate_hz,
            channel_names,
            target_hz,
            trial_id,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.rate_hz
    }

    /// Keeps only samples in `[start_s, end_s)`.
    pub fn crop(&self, start_s: f64, end_s: f64) -> Result<Self> {
        let first = (start_s * self.rate_hz).round();
        let last = (end_s * self.rate_hz).round().min(self.n_samples() as f64);
        if !(first >= 0.0 && last > first) {
            return Err(Error::Config(format!(
                "trial {}: invalid crop interval [{start_s}, {end_s})",
                self.trial_id
            )));
        }
        let (first, last) = (first as usize, last as usize);
        Self::new(
            self.samples.rows(first, last - first).into_owned(),
            self.rate_hz,
            self.channel_names.clone(),
            self.target_hz,
            self.trial_id,
        )
    }
}

/// Reads a comma-delimited signal file whose header row names the channels,
/// keeping only `channels` in the requested order.
pub fn load_trial(
    path: &Path,
    rate_hz: f64,
    target_hz: f64,
    channels: &[String],
    trial_id: u64,
) -> Result<EegTrial> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let width = header.len();

    let mut picks = Vec::with_capacity(channels.len());
    for name in channels {
        match header.iter().position(|h| h == name) {
            Some(col) => picks.push(col),
            None => {
                return Err(Error::parse(
                    path,
                    1,
                    0,
                    format!("channel \"{name}\" not found in header"),
                ))
            }
        }
    }
    if picks.is_empty() {
        return Err(Error::Config("no channels requested".into()));
    }

    let mut values = Vec::new();
    let mut n_rows = 0usize;
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
        for &col in &picks {
            let cell = &record[col];
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(path, line, col + 1, format!("non-numeric value \"{cell}\""))
            })?;
            values.push(v);
        }
        n_rows += 1;
    }

    let samples = DMatrix::from_row_slice(n_rows, picks.len(), &values);
    EegTrial::new(samples, rate_hz, channels.to_vec(), target_hz, trial_id)
}

/// Writes a trial in the same layout `load_trial` reads.
pub fn save_trial(trial: &EegTrial, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(&trial.channel_names)
        .map_err(|e| csv_error(path, e))?;
    let mut row = Vec::with_capacity(trial.n_channels());
    for r in 0..trial.n_samples() {
        row.clear();
        row.extend(trial.samples.row(r).iter().map(|v| v.to_string()));
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    let (line, column) = match err.position() {
        Some(pos) => (pos.line() as usize, 0),
        None => (0, 0),
    };
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::parse(path, line, column, format!("{other:?}")),
    }
}
