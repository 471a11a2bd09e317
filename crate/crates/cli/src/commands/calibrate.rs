//! `beetscan calibrate-mass`: fit the average mass per unit area.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use beetscan_core::pipeline::{calibrate_mass, MassSample};

#[derive(Deserialize)]
struct SamplesFile {
    samples: Vec<MassSample>,
}

pub fn run(samples: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(samples)
        .with_context(|| format!("cannot read {}", samples.display()))?;
    let file: SamplesFile = serde_json::from_str(&text)
        .with_context(|| format!("invalid samples file {}", samples.display()))?;
    let model = calibrate_mass(&file.samples).context("calibration failed")?;
    std::fs::write(out, serde_json::to_string_pretty(&model).expect("model serialize"))
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "m_bar {:.6} g/mm^2 from {} samples (mean rel err {:.3}%, max {:.3}%)",
        model.g_per_mm2,
        model.samples,
        model.mean_rel_err * 100.0,
        model.max_rel_err * 100.0
    );
    Ok(())
}
