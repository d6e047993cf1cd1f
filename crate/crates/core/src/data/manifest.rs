//! CSV manifests: a `path,label` header, optionally followed by a second
//! annotator column `label2`. Relative paths resolve against the manifest's
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{load_image, Dataset, Sample};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows: usize,
    pub loaded: usize,
    /// Rows dropped because the two annotators disagreed.
    pub excluded_disagreements: usize,
}

fn parse_label(raw: &str, line: usize, path: &Path) -> Result<u8> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Data(format!(
            "{}:{line}: label {other:?} is not 0 or 1",
            path.display()
        ))),
    }
}

/// Loads every image listed in `manifest`. Rows whose two labels disagree are
/// skipped and counted in the returned report.
pub fn load_manifest(manifest: &Path) -> Result<(Dataset, LoadReport)> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::Format {
        path: manifest.to_owned(),
        message: e.to_string(),
    })?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let path_col = col("path");
    let label_col = col("label");
    let second_col = col("label2");
    let (Some(path_col), Some(label_col)) = (path_col, label_col) else {
        return Err(Error::Data(format!(
            "{}: header must contain `path` and `label`",
            manifest.display()
        )));
    };

    let mut report = LoadReport::default();
    let mut items = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        report.rows += 1;
        let label = parse_label(record.get(label_col).unwrap_or(""), line, manifest)?;
        if let Some(c) = second_col {
            let second = parse_label(record.get(c).unwrap_or(""), line, manifest)?;
            if second != label {
                report.excluded_disagreements += 1;
                continue;
            }
        }
        let rel = PathBuf::from(record.get(path_col).unwrap_or(""));
        let full = if rel.is_absolute() {
            rel.clone()
        } else {
            base.join(&rel)
        };
        items.push(Sample {
            image: load_image(&full)?,
            label,
            path: Some(rel),
        });
    }
    report.loaded = items.len();
    Ok((Dataset::new(items)?, report))
}

/// Writes a `path,label` manifest for samples that carry a path.
pub fn write_manifest(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["path", "label"])?;
    for (i, s) in dataset.items.iter().enumerate() {
        let p = s
            .path
            .as_ref()
            .ok_or_else(|| Error::Data(format!("item {i} has no path")))?;
        w.write_record([p.to_string_lossy().as_ref(), &s.label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
