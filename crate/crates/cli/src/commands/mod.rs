pub mod calibrate;
pub mod convert;
pub mod evaluate;
pub mod inspect;
pub mod split;
pub mod stats;

use std::path::Path;

use anyhow::{Context, Result};

use beetscan_core::annot::{load_annotations, AnnotatedImage};

/// Load a dataset, printing ingest warnings to stderr.
pub fn load_dataset(path: &Path) -> Result<Vec<AnnotatedImage>> {
    let result = load_annotations(path)
        .with_context(|| format!("cannot load dataset {}", path.display()))?;
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(result.images)
}

/// Minimal CSV writer; fields in this toolkit never contain commas or
/// quotes.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
