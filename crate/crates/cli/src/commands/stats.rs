//! `beetscan stats`: per-stage dataset statistics and, on request, label
//! pixel distributions.

use std::path::Path;

use anyhow::{Context, Result};

use beetscan_core::annot::{dataset_stats, label_pixel_distribution};
use beetscan_core::geometry::rasterize;
use beetscan_core::SemanticClass;

use super::{load_dataset, write_csv};

pub fn run(dataset: &Path, out: Option<&Path>, pixels: bool) -> Result<()> {
    let images = load_dataset(dataset)?;
    let table = dataset_stats(&images);
    print!("{}", table.render());

    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        std::fs::write(
            out.join("stats.json"),
            serde_json::to_string_pretty(&table).expect("stats serialize"),
        )
        .context("cannot write stats.json")?;
        let rows: Vec<Vec<String>> = table
            .rows
            .iter()
            .map(|row| {
                vec![
                    row.stage.name().to_string(),
                    row.images.to_string(),
                    row.beets.to_string(),
                    format!("{:.6}", row.beets_per_image),
                    format!("{:.6}", row.beet_share_pct),
                ]
            })
            .chain(std::iter::once(vec![
                "Total".to_string(),
                table.total_images.to_string(),
                table.total_beets.to_string(),
                format!("{:.6}", table.total_beets_per_image),
                format!("{:.6}", if table.total_beets > 0 { 100.0 } else { 0.0 }),
            ]))
            .collect();
        write_csv(
            &out.join("stats.csv"),
            &["stage", "images", "beets", "beets_per_image", "beet_share_pct"],
            &rows,
        )?;
    }

    if pixels {
        let distribution = label_pixel_distribution(&images, |image| {
            Some(rasterize(&image.regions, image.width, image.height))
        })?;
        let out = out.context("--pixels requires --out for the CSV files")?;
        let per_image_rows: Vec<Vec<String>> = distribution
            .per_image
            .iter()
            .map(|entry| {
                let mut row = vec![entry.image_id.clone(), entry.stage.name().to_string()];
                row.extend(entry.counts.iter().map(|c| c.to_string()));
                row
            })
            .collect();
        write_csv(
            &out.join("label_pixels.csv"),
            &["image_id", "stage", "Bg", "Beet", "Cut", "Leaf", "Soil", "Dmg", "Rot"],
            &per_image_rows,
        )?;
        let total_rows: Vec<Vec<String>> = distribution
            .stage_totals()
            .iter()
            .flat_map(|(stage, counts)| {
                SemanticClass::ALL.iter().map(move |class| {
                    vec![
                        stage.name().to_string(),
                        class.name().to_string(),
                        counts[class.index()].to_string(),
                    ]
                })
            })
            .collect();
        write_csv(&out.join("label_totals.csv"), &["stage", "class", "pixels"], &total_rows)?;
    }
    Ok(())
}
