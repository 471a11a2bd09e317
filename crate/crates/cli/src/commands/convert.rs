//! `beetscan convert`: fine-grained annotations to the one-class instance
//! dataset, with a sidecar report of skipped and dropped items.

use std::path::Path;

use anyhow::{Context, Result};

use beetscan_core::synthesis::write_instance_dataset;

use super::load_dataset;

pub fn run(dataset: &Path, out: &Path) -> Result<()> {
    let images = load_dataset(dataset)?;
    let report = write_instance_dataset(&images, out)
        .with_context(|| format!("cannot write {}", out.display()))?;

    for (image_id, instance_id) in &report.leaf_only_instances {
        eprintln!("skipped: instance {instance_id} of image `{image_id}` has only Leaf regions");
    }
    for (image_id, instance_id, area) in &report.dropped_regions {
        eprintln!(
            "dropped: a {area:.0} px^2 region of instance {instance_id} in image `{image_id}` never overlaps its merged shape"
        );
    }

    let report_path = sidecar_path(out);
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).expect("report serialize"),
    )
    .with_context(|| format!("cannot write {}", report_path.display()))?;

    println!(
        "converted {} images ({} leaf-only instances skipped, {} stray regions dropped)",
        images.len(),
        report.leaf_only_instances.len(),
        report.dropped_regions.len()
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> std::path::PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.report.json"))
}
