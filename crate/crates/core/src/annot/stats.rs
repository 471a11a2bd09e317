//! Dataset statistics: per-stage image/beet counts and per-class pixel
//! distributions.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{AnnotatedImage, SemanticClass, Stage};
use crate::error::{Error, Result};
use crate::geometry::SemanticMask;

/// One stage row of the statistics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRow {
    pub stage: Stage,
    pub images: u64,
    pub beets: u64,
    /// Average beet instances per image; 0 when the stage has no images.
    pub beets_per_image: f64,
    /// Share of all beet instances in percent; 0 when the dataset is empty.
    pub beet_share_pct: f64,
}

/// Per-stage statistics plus a totals row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub rows: Vec<StageRow>,
    pub total_images: u64,
    pub total_beets: u64,
    pub total_beets_per_image: f64,
}

impl StatsTable {
    /// Render the table the way it is printed by the CLI.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>7} {:>7} {:>6} {:>7}\n",
            "Stage", "Img", "Beets", "B/I", "Ratio"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>7} {:>7} {:>6.1} {:>7.1}\n",
                row.stage.name(),
                row.images,
                row.beets,
                row.beets_per_image,
                row.beet_share_pct
            ));
        }
        out.push_str(&format!(
            "{:<8} {:>7} {:>7} {:>6.1}\n",
            "Total", self.total_images, self.total_beets, self.total_beets_per_image
        ));
        out
    }
}

/// Count images, beet instances and their ratios per processing stage.
///
/// A beet instance is a distinct `instance_id` within one image; beets
/// photographed from both sides count once per image.
pub fn dataset_stats(images: &[AnnotatedImage]) -> StatsTable {
    let mut per_stage: BTreeMap<Stage, (u64, u64)> = Stage::ALL.iter().map(|s| (*s, (0, 0))).collect();
    for image in images {
        let entry = per_stage.get_mut(&image.meta.stage).expect("all stages present");
        entry.0 += 1;
        entry.1 += image.instance_ids().len() as u64;
    }

    let total_images: u64 = per_stage.values().map(|(i, _)| i).sum();
    let total_beets: u64 = per_stage.values().map(|(_, b)| b).sum();

    let rows = Stage::ALL
        .iter()
        .map(|stage| {
            let (images, beets) = per_stage[stage];
            StageRow {
                stage: *stage,
                images,
                beets,
                beets_per_image: ratio(beets, images),
                beet_share_pct: 100.0 * ratio(beets, total_beets),
            }
        })
        .collect();

    StatsTable {
        rows,
        total_images,
        total_beets,
        total_beets_per_image: ratio(total_beets, total_images),
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Pixel counts of the seven classes for one image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImagePixelCounts {
    pub image_id: String,
    pub stage: Stage,
    pub counts: [u64; SemanticClass::COUNT],
}

/// Per-image class pixel counts, suitable for plotting distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDistribution {
    pub per_image: Vec<ImagePixelCounts>,
}

impl LabelDistribution {
    /// Total pixel count per (stage, class).
    pub fn stage_totals(&self) -> BTreeMap<Stage, [u64; SemanticClass::COUNT]> {
        let mut totals: BTreeMap<Stage, [u64; 7]> =
            Stage::ALL.iter().map(|s| (*s, [0u64; 7])).collect();
        for entry in &self.per_image {
            let row = totals.get_mut(&entry.stage).expect("all stages present");
            for (total, count) in row.iter_mut().zip(entry.counts) {
                *total += count;
            }
        }
        totals
    }
}

/// Tally per-class pixel counts over rasterized masks.
///
/// `mask_for` supplies the rasterized mask of each image (typically
/// `geometry::rasterize` over the image's regions); returning `None` for
/// an image is an error naming it.
pub fn label_pixel_distribution(
    images: &[AnnotatedImage],
    mut mask_for: impl FnMut(&AnnotatedImage) -> Option<SemanticMask>,
) -> Result<LabelDistribution> {
    let mut per_image = Vec::with_capacity(images.len());
    for image in images {
        let mask = mask_for(image).ok_or_else(|| {
            Error::Validation(format!("no mask available for image `{}`", image.image_id))
        })?;
        per_image.push(ImagePixelCounts {
            image_id: image.image_id.clone(),
            stage: image.meta.stage,
            counts: mask.class_counts(),
        });
    }
    Ok(LabelDistribution { per_image })
}
