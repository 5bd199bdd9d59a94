use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One manifest line: `path,target_hz,trial_id[,crop_start_s,crop_end_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub target_hz: f64,
    pub trial_id: u64,
    pub crop: Option<(f64, f64)>,
}

/// Parses a manifest. Relative trial paths resolve against the manifest's
/// directory; blank lines and `#` comments are skipped.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 5 {
            return Err(Error::parse(
                path,
                line,
                0,
                format!("expected 3 or 5 fields, found {}", fields.len()),
            ));
        }
        let number = |col: usize| -> Result<f64> {
            fields[col].parse().map_err(|_| {
                Error::parse(path, line, col + 1, format!("non-numeric value \"{}\"", fields[col]))
            })
        };
        let target_hz = number(1)?;
        let trial_id: u64 = fields[2].parse().map_err(|_| {
            Error::parse(path, line, 3, format!("bad trial id \"{}\"", fields[2]))
        })?;
        let crop = if fields.len() == 5 {
            Some((number(3)?, number(4)?))
        } else {
            None
        };
        let file = PathBuf::from(fields[0]);
        let file = if file.is_absolute() { file } else { base.join(file) };
        if entries.iter().any(|e: &ManifestEntry| e.trial_id == trial_id) {
            return Err(Error::parse(path, line, 3, format!("duplicate trial id {trial_id}")));
        }
        entries.push(ManifestEntry {
            path: file,
            target_hz,
            trial_id,
            crop,
        });
    }
    Ok(entries)
}

/// Writes entries with paths relative to `dir` when possible.
pub fn save_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = String::new();
    for e in entries {
        let p = e.path.strip_prefix(dir).unwrap_or(&e.path);
        out.push_str(&format!("{},{},{}", p.display(), e.target_hz, e.trial_id));
        if let Some((a, b)) = e.crop {
            out.push_str(&format!(",{a},{b}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
