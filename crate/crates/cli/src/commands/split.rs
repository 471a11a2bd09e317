//! `beetscan split`: deterministic grouped train/val/test split.

use std::path::Path;

use anyhow::{Context, Result};

use beetscan_core::annot::make_split;

use super::load_dataset;

pub fn run(dataset: &Path, out: &Path, ratios: [f64; 3], seed: u64) -> Result<()> {
    let images = load_dataset(dataset)?;
    let split = make_split(&images, (ratios[0], ratios[1], ratios[2]), seed)
        .context("split failed")?;
    split
        .save(out)
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "split {} images into {}/{}/{} (seed {seed})",
        images.len(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}
