//! Conversion of fine-grained multi-class annotations into single-polygon
//! coarse instance annotations.
//!
//! Per beet instance: vegetation (`Leaf`) is discarded, the largest
//! remaining region seeds the merge, and every region whose rasterized
//! mask shares at least one pixel with the growing merged shape is
//! absorbed. The union is computed on the raster at native image
//! resolution with interior holes filled, then traced back into one
//! polygon; the pixel-wise OR of the contributing region masks defines
//! correctness.

use std::collections::BTreeMap;
use std::path::Path;

use crate::annot::{
    save_annotations, AnnotatedImage, AnnotatedRegion, Polygon, SemanticClass,
};
use crate::error::{Error, Result};
use crate::geometry::{fill_holes, polygon_area, rasterize_polygon, trace_boundary, BinaryMask};

/// One merged beet silhouette; the class is always `Beet`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub image_id: String,
    pub instance_id: u32,
    pub polygon: Polygon,
}

/// What synthesis left out, per image.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct SynthesisReport {
    /// Instances that had only `Leaf` regions and produced no output.
    pub leaf_only_instances: Vec<(String, u32)>,
    /// Regions never connected to their instance's merged shape, as
    /// `(image_id, instance_id, region_area_px)`.
    pub dropped_regions: Vec<(String, u32, f64)>,
    /// Instances whose merged shape covers no pixel center at all
    /// (sub-pixel slivers); they produce no output.
    pub subpixel_instances: Vec<(String, u32)>,
}

impl SynthesisReport {
    pub fn merge(&mut self, other: SynthesisReport) {
        self.leaf_only_instances.extend(other.leaf_only_instances);
        self.dropped_regions.extend(other.dropped_regions);
        self.subpixel_instances.extend(other.subpixel_instances);
    }

    pub fn is_empty(&self) -> bool {
        self.leaf_only_instances.is_empty()
            && self.dropped_regions.is_empty()
            && self.subpixel_instances.is_empty()
    }
}

/// Merge every instance of an image into one `Beet` silhouette each.
pub fn synthesize_instances(image: &AnnotatedImage) -> (Vec<InstanceAnnotation>, SynthesisReport) {
    let mut report = SynthesisReport::default();
    let mut by_instance: BTreeMap<u32, Vec<&AnnotatedRegion>> = BTreeMap::new();
    for region in &image.regions {
        by_instance.entry(region.instance_id()).or_default().push(region);
    }

    let mut instances = Vec::new();
    for (instance_id, regions) in by_instance {
        let mut candidates: Vec<&AnnotatedRegion> = regions
            .iter()
            .copied()
            .filter(|r| r.class() != SemanticClass::Leaf)
            .collect();
        if candidates.is_empty() {
            report.leaf_only_instances.push((image.image_id.clone(), instance_id));
            continue;
        }
        // order-independent processing: largest area first, vertex list as
        // tie break
        candidates.sort_by(|a, b| {
            polygon_area(b.polygon())
                .partial_cmp(&polygon_area(a.polygon()))
                .expect("finite areas")
                .then_with(|| {
                    a.polygon()
                        .vertices()
                        .partial_cmp(b.polygon().vertices())
                        .expect("finite vertices")
                })
        });

        let masks: Vec<BinaryMask> = candidates
            .iter()
            .map(|r| rasterize_polygon(r.polygon().vertices(), image.width, image.height))
            .collect();

        let mut merged = masks[0].clone();
        let mut pending: Vec<usize> = (1..candidates.len()).collect();
        loop {
            let before = pending.len();
            pending.retain(|&index| {
                if masks[index].intersects(&merged) {
                    merged.or_assign(&masks[index]);
                    false
                } else {
                    true
                }
            });
            if pending.len() == before {
                break;
            }
        }
        for index in pending {
            report.dropped_regions.push((
                image.image_id.clone(),
                instance_id,
                polygon_area(candidates[index].polygon()),
            ));
        }

        if merged.is_empty() {
            report.subpixel_instances.push((image.image_id.clone(), instance_id));
            continue;
        }
        fill_holes(&mut merged);
        let polygon = mask_to_polygon(&merged)
            .expect("non-empty hole-free mask has a traceable outer contour");
        instances.push(InstanceAnnotation {
            image_id: image.image_id.clone(),
            instance_id,
            polygon,
        });
    }
    (instances, report)
}

/// Trace a hole-free mask into a single polygon. Disconnected parts are
/// stitched with zero-width bridges, which cancel under the even-odd rule.
fn mask_to_polygon(mask: &BinaryMask) -> Result<Polygon> {
    let mut loops = trace_boundary(mask);
    if loops.is_empty() {
        return Err(Error::Geometry("cannot trace an empty mask".into()));
    }
    let mut joined = loops.remove(0);
    for other in loops {
        joined = keyhole_join(joined, other);
    }
    Polygon::new(joined)
}

/// Join two disjoint loops into one even-odd-equivalent loop through a
/// doubled bridge segment.
fn keyhole_join(a: Vec<[f64; 2]>, b: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    // closest distinct vertex pair keeps the bridge short; a zero-length
    // bridge would create consecutive duplicate vertices
    let (mut best_i, mut best_j, mut best_d) = (0, 0, f64::INFINITY);
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2);
            if d > 0.0 && d < best_d {
                (best_i, best_j, best_d) = (i, j, d);
            }
        }
    }
    let mut joined = Vec::with_capacity(a.len() + b.len() + 2);
    joined.extend(a[best_i..].iter().copied());
    joined.extend(a[..best_i].iter().copied());
    joined.push(a[best_i]);
    joined.extend(b[best_j..].iter().copied());
    joined.extend(b[..best_j].iter().copied());
    joined.push(b[best_j]);
    joined
}

/// Run synthesis over a dataset and build the converted one-class images.
pub fn synthesize_dataset(images: &[AnnotatedImage]) -> (Vec<AnnotatedImage>, SynthesisReport) {
    let mut report = SynthesisReport::default();
    let converted = images
        .iter()
        .map(|image| {
            let (instances, image_report) = synthesize_instances(image);
            report.merge(image_report);
            let regions = instances
                .into_iter()
                .map(|instance| {
                    AnnotatedRegion::new(SemanticClass::Beet, instance.polygon, instance.instance_id)
                        .expect("Beet is never Bg")
                })
                .collect();
            AnnotatedImage {
                regions,
                ..image.clone()
            }
        })
        .collect();
    (converted, report)
}

/// Write the converted one-class instance dataset in the annotation JSON
/// schema.
pub fn write_instance_dataset(images: &[AnnotatedImage], out_path: &Path) -> Result<SynthesisReport> {
    let (converted, report) = synthesize_dataset(images);
    save_annotations(&converted, out_path)?;
    Ok(report)
}
