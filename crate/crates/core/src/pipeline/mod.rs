//! Two-stage orchestration: detect instances, extract patches, segment,
//! fuse into a full-resolution semantic map, recover scale and estimate
//! per-beet areas and mass.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::annot::{MarkerAnnotation, MarkerClass, SemanticClass};
use crate::backends::{
    validate_instances, validate_markers, validate_patch_mask, ImageHandle, InspectionBackend,
    PatchQuery,
};
use crate::error::{Error, Result};
use crate::geometry::{
    estimate_scale, mask_area_mm2, AxisAlignedBox, BinaryMask, MarkerDims, ScaleEstimate,
    SemanticMask,
};
use crate::raster::RgbRaster;

/// Letterbox fill for patch pixels outside the cropped content.
pub const LETTERBOX_FILL: [u8; 3] = [128, 128, 128];

/// The three supported stage-2 input sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchTier {
    Small,
    Medium,
    Large,
}

impl PatchTier {
    pub fn size(self) -> (u32, u32) {
        match self {
            PatchTier::Small => (512, 288),
            PatchTier::Medium => (768, 448),
            PatchTier::Large => (1056, 576),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PatchTier::Small => "small",
            PatchTier::Medium => "medium",
            PatchTier::Large => "large",
        }
    }

    pub fn from_name(name: &str) -> Option<PatchTier> {
        match name {
            "small" => Some(PatchTier::Small),
            "medium" => Some(PatchTier::Medium),
            "large" => Some(PatchTier::Large),
            _ => None,
        }
    }
}

/// Mapping between an image crop and a letterboxed patch.
///
/// Applying `forward` then `inverse` returns every content-region pixel
/// center to within half a pixel of its origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchTransform {
    /// Source crop rectangle in image coordinates.
    pub crop_x: f64,
    pub crop_y: f64,
    pub crop_w: f64,
    pub crop_h: f64,
    /// Patch dimensions.
    pub target_w: u32,
    pub target_h: u32,
    /// Uniform image-to-patch scale factor.
    pub scale: f64,
    /// Letterbox offsets inside the patch.
    pub pad_x: f64,
    pub pad_y: f64,
}

impl PatchTransform {
    /// Image coordinates to patch coordinates.
    pub fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.crop_x) * self.scale + self.pad_x,
            (p[1] - self.crop_y) * self.scale + self.pad_y,
        ]
    }

    /// Patch coordinates to image coordinates.
    pub fn inverse(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.crop_x + (p[0] - self.pad_x) / self.scale,
            self.crop_y + (p[1] - self.pad_y) / self.scale,
        ]
    }

    /// Patch-space rectangle actually backed by image content.
    pub fn content_region(&self) -> (f64, f64, f64, f64) {
        (
            self.pad_x,
            self.pad_y,
            self.pad_x + self.crop_w * self.scale,
            self.pad_y + self.crop_h * self.scale,
        )
    }
}

/// Crop an instance box (expanded by `margin_frac` per side, clamped to
/// the image), scale it uniformly to fit the target and letterbox the
/// rest.
pub fn extract_patch(
    image: &RgbRaster,
    bbox: &AxisAlignedBox,
    target: (u32, u32),
    margin_frac: f64,
) -> Result<(RgbRaster, PatchTransform)> {
    let (target_w, target_h) = target;
    if target_w == 0 || target_h == 0 {
        return Err(Error::Geometry("patch target size must be positive".into()));
    }
    if margin_frac < 0.0 {
        return Err(Error::Geometry("margin_frac must be non-negative".into()));
    }
    let margin_x = margin_frac * bbox.width();
    let margin_y = margin_frac * bbox.height();
    let crop_x0 = (bbox.x_min - margin_x).max(0.0);
    let crop_y0 = (bbox.y_min - margin_y).max(0.0);
    let crop_x1 = (bbox.x_max + margin_x).min(f64::from(image.width()));
    let crop_y1 = (bbox.y_max + margin_y).min(f64::from(image.height()));
    let crop_w = crop_x1 - crop_x0;
    let crop_h = crop_y1 - crop_y0;
    if crop_w <= 0.0 || crop_h <= 0.0 {
        return Err(Error::Geometry("instance box degenerate after clamping to the image".into()));
    }

    let scale = (f64::from(target_w) / crop_w).min(f64::from(target_h) / crop_h);
    let content_w = crop_w * scale;
    let content_h = crop_h * scale;
    let pad_x = ((f64::from(target_w) - content_w) / 2.0).floor();
    let pad_y = ((f64::from(target_h) - content_h) / 2.0).floor();
    let transform = PatchTransform {
        crop_x: crop_x0,
        crop_y: crop_y0,
        crop_w,
        crop_h,
        target_w,
        target_h,
        scale,
        pad_x,
        pad_y,
    };

    let (cx0, cy0, cx1, cy1) = transform.content_region();
    let mut patch = RgbRaster::filled(target_w, target_h, LETTERBOX_FILL);
    let max_x = image.width() - 1;
    let max_y = image.height() - 1;
    for py in 0..target_h {
        let center_y = f64::from(py) + 0.5;
        if center_y < cy0 || center_y >= cy1 {
            continue;
        }
        for px in 0..target_w {
            let center_x = f64::from(px) + 0.5;
            if center_x < cx0 || center_x >= cx1 {
                continue;
            }
            let [ix, iy] = transform.inverse([center_x, center_y]);
            let sx = (ix.floor().max(0.0) as u32).min(max_x);
            let sy = (iy.floor().max(0.0) as u32).min(max_y);
            patch.set(px, py, image.get(sx, sy));
        }
    }
    Ok((patch, transform))
}

/// One segmented instance ready for fusion.
#[derive(Debug, Clone)]
pub struct FusePiece {
    pub patch_mask: SemanticMask,
    pub transform: PatchTransform,
    pub instance_mask: BinaryMask,
    pub score: f64,
}

/// Result of fusing patch masks back onto the full canvas.
#[derive(Debug, Clone)]
pub struct FuseOutcome {
    pub mask: SemanticMask,
    /// Instance-mask pixels that no patch pixel mapped onto.
    pub dropped_pixels: u64,
}

/// Paste patch masks back into image space, restricted to each instance's
/// stage-1 mask.
///
/// Instances are applied in ascending confidence order, so
/// higher-confidence instances overwrite earlier ones where they overlap.
/// Nothing is ever written outside the union of instance masks.
pub fn fuse(pieces: &[FusePiece], canvas: (u32, u32)) -> Result<FuseOutcome> {
    let (width, height) = canvas;
    let mut mask = SemanticMask::filled(width, height, SemanticClass::Bg);
    let mut dropped = 0u64;

    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|a, b| pieces[*a].score.partial_cmp(&pieces[*b].score).expect("finite scores"));

    for index in order {
        let piece = &pieces[index];
        if (piece.instance_mask.width(), piece.instance_mask.height()) != canvas {
            return Err(Error::Geometry("instance mask does not match the canvas".into()));
        }
        validate_patch_mask(&piece.patch_mask, &piece.transform)?;
        let Some(bbox) = piece.instance_mask.bbox() else {
            continue;
        };
        let x0 = bbox.x_min as u32;
        let y0 = bbox.y_min as u32;
        let x1 = (bbox.x_max as u32).min(width);
        let y1 = (bbox.y_max as u32).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                if !piece.instance_mask.get(x, y) {
                    continue;
                }
                let [fx, fy] = piece
                    .transform
                    .forward([f64::from(x) + 0.5, f64::from(y) + 0.5]);
                let px = fx.floor();
                let py = fy.floor();
                if px < 0.0
                    || py < 0.0
                    || px >= f64::from(piece.transform.target_w)
                    || py >= f64::from(piece.transform.target_h)
                {
                    dropped += 1;
                    continue;
                }
                let value = piece.patch_mask.get(px as u32, py as u32);
                mask.set(x, y, SemanticClass::from_index(value).expect("valid mask"));
            }
        }
    }
    Ok(FuseOutcome { mask, dropped_pixels: dropped })
}

/// One mass calibration sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSample {
    pub area_mm2: f64,
    pub mass_g: f64,
}

/// Area-based mass model: average mass per unit of projected beet area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassModel {
    pub g_per_mm2: f64,
    pub samples: usize,
    pub mean_rel_err: f64,
    pub max_rel_err: f64,
}

/// Fit the average mass per unit area from calibration samples.
pub fn calibrate_mass(samples: &[MassSample]) -> Result<MassModel> {
    if samples.is_empty() {
        return Err(Error::Validation("mass calibration needs at least one sample".into()));
    }
    if let Some(bad) = samples.iter().find(|s| s.area_mm2 <= 0.0 || s.mass_g <= 0.0) {
        return Err(Error::Validation(format!(
            "non-positive calibration sample: {} mm^2, {} g",
            bad.area_mm2, bad.mass_g
        )));
    }
    let area_sum: f64 = samples.iter().map(|s| s.area_mm2).sum();
    let mass_sum: f64 = samples.iter().map(|s| s.mass_g).sum();
    let g_per_mm2 = mass_sum / area_sum;
    let rel_errs: Vec<f64> = samples
        .iter()
        .map(|s| (g_per_mm2 * s.area_mm2 - s.mass_g).abs() / s.mass_g)
        .collect();
    Ok(MassModel {
        g_per_mm2,
        samples: samples.len(),
        mean_rel_err: rel_errs.iter().sum::<f64>() / rel_errs.len() as f64,
        max_rel_err: rel_errs.iter().cloned().fold(0.0, f64::max),
    })
}

/// Predicted mass of a beet from its projected area.
pub fn estimate_mass(area_mm2: f64, model: &MassModel) -> f64 {
    area_mm2 * model.g_per_mm2
}

/// Everything `inspect_image` needs besides the backends.
#[derive(Debug, Clone)]
pub struct InspectConfig {
    pub target: (u32, u32),
    pub margin_frac: f64,
    /// Physical dimensions per marker class; markers of unlisted classes
    /// cannot provide scale.
    pub marker_dims: BTreeMap<MarkerClass, MarkerDims>,
    /// Markers with a larger per-side residual are rejected.
    pub scale_residual_bound: f64,
    pub mass_model: Option<MassModel>,
}

impl Default for InspectConfig {
    fn default() -> Self {
        InspectConfig {
            target: PatchTier::Large.size(),
            margin_frac: 0.05,
            marker_dims: BTreeMap::new(),
            scale_residual_bound: 0.1,
            mass_model: None,
        }
    }
}

/// Beet-body classes whose area enters the mass estimate: background and
/// vegetation are excluded.
pub const BODY_CLASSES: [SemanticClass; 5] = [
    SemanticClass::Beet,
    SemanticClass::Cut,
    SemanticClass::Soil,
    SemanticClass::Dmg,
    SemanticClass::Rot,
];

/// Per-beet class areas and mass estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeetReport {
    /// 1-based rank by descending confidence.
    pub id: u32,
    /// Pixel count per class name within the instance mask; sums to the
    /// instance mask pixel count.
    pub areas_px: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub areas_mm2: Option<BTreeMap<String, f64>>,
    /// Beet body area (non-background, non-vegetation classes) in mm^2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_area_mm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_g: Option<f64>,
    pub score: f64,
}

impl BeetReport {
    pub fn area_px(&self, class: SemanticClass) -> u64 {
        *self.areas_px.get(class.name()).unwrap_or(&0)
    }
}

/// Wall-clock milliseconds per pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub instances: f64,
    pub patches: f64,
    pub segmentation: f64,
    pub fusion: f64,
    pub markers: f64,
    pub total: f64,
}

/// Full inspection result of one image, serializable as the report JSON.
/// The fused mask itself is written as an indexed PNG next to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionReport {
    pub image_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleEstimate>,
    /// Sorted by descending instance confidence.
    pub beets: Vec<BeetReport>,
    pub dropped_pixels: u64,
    pub timings_ms: StageTimings,
}

impl InspectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes")
    }

    pub fn from_json(text: &str) -> Result<InspectionReport> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("invalid report: {e}")))
    }
}

/// Report plus the fused full-resolution mask.
#[derive(Debug, Clone)]
pub struct InspectionOutcome {
    pub report: InspectionReport,
    pub fused: SemanticMask,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Run the full two-stage inspection of one image.
///
/// Scale comes from the highest-confidence marker whose residual stays
/// within the configured bound; mm^2 and mass fields are omitted (not
/// zeroed) when no scale or no mass model is available.
pub fn inspect_image(
    image: &ImageHandle,
    raster: &RgbRaster,
    backend: &mut dyn InspectionBackend,
    config: &InspectConfig,
) -> Result<InspectionOutcome> {
    let total_start = Instant::now();

    let stage_start = Instant::now();
    let instances = backend
        .instances(image)
        .map_err(|e| e.at_stage("instances"))?;
    validate_instances(&instances, image).map_err(|e| e.at_stage("instances"))?;
    let instances_ms = ms_since(stage_start);

    let mut patches_ms = 0.0;
    let mut segmentation_ms = 0.0;
    let mut pieces = Vec::with_capacity(instances.len());
    for prediction in &instances {
        let stage_start = Instant::now();
        let (patch, transform) =
            extract_patch(raster, &prediction.bbox, config.target, config.margin_frac)
                .map_err(|e| e.at_stage("patches"))?;
        patches_ms += ms_since(stage_start);

        let stage_start = Instant::now();
        let query = PatchQuery {
            image,
            raster: &patch,
            transform: &transform,
        };
        let patch_mask = backend
            .segment_patch(&query)
            .map_err(|e| e.at_stage("segmentation"))?;
        validate_patch_mask(&patch_mask, &transform).map_err(|e| e.at_stage("segmentation"))?;
        segmentation_ms += ms_since(stage_start);

        pieces.push(FusePiece {
            patch_mask,
            transform,
            instance_mask: prediction.mask.clone(),
            score: prediction.score,
        });
    }

    let stage_start = Instant::now();
    let fused = fuse(&pieces, (image.width, image.height)).map_err(|e| e.at_stage("fusion"))?;
    let fusion_ms = ms_since(stage_start);

    let stage_start = Instant::now();
    let markers = backend.markers(image).map_err(|e| e.at_stage("markers"))?;
    validate_markers(&markers).map_err(|e| e.at_stage("markers"))?;
    let scale = select_scale(&markers, config);
    let markers_ms = ms_since(stage_start);

    // rank instances by descending confidence for reporting
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|a, b| pieces[*b].score.partial_cmp(&pieces[*a].score).expect("finite scores"));

    let mut beets = Vec::with_capacity(order.len());
    for (rank, index) in order.into_iter().enumerate() {
        let piece = &pieces[index];
        let mut counts = [0u64; SemanticClass::COUNT];
        for y in 0..image.height {
            for x in 0..image.width {
                if piece.instance_mask.get(x, y) {
                    counts[fused.mask.get(x, y) as usize] += 1;
                }
            }
        }
        let areas_px: BTreeMap<String, u64> = SemanticClass::ALL
            .iter()
            .map(|class| (class.name().to_string(), counts[class.index()]))
            .collect();
        let areas_mm2 = scale.as_ref().map(|s| {
            SemanticClass::ALL
                .iter()
                .map(|class| {
                    (
                        class.name().to_string(),
                        mask_area_mm2(counts[class.index()] as f64, s),
                    )
                })
                .collect::<BTreeMap<String, f64>>()
        });
        let total_area_mm2 = scale.as_ref().map(|s| {
            let body_px: u64 = BODY_CLASSES.iter().map(|class| counts[class.index()]).sum();
            mask_area_mm2(body_px as f64, s)
        });
        let mass_g = match (total_area_mm2, &config.mass_model) {
            (Some(area), Some(model)) => Some(estimate_mass(area, model)),
            _ => None,
        };
        beets.push(BeetReport {
            id: rank as u32 + 1,
            areas_px,
            areas_mm2,
            total_area_mm2,
            mass_g,
            score: piece.score,
        });
    }

    let report = InspectionReport {
        image_id: image.image_id.clone(),
        scale,
        beets,
        dropped_pixels: fused.dropped_pixels,
        timings_ms: StageTimings {
            instances: instances_ms,
            patches: patches_ms,
            segmentation: segmentation_ms,
            fusion: fusion_ms,
            markers: markers_ms,
            total: ms_since(total_start),
        },
    };
    Ok(InspectionOutcome {
        report,
        fused: fused.mask,
    })
}

/// Highest-confidence marker with configured dimensions and an acceptable
/// residual wins.
fn select_scale(
    markers: &[crate::backends::OrientedDetection],
    config: &InspectConfig,
) -> Option<ScaleEstimate> {
    let mut order: Vec<usize> = (0..markers.len()).collect();
    order.sort_by(|a, b| markers[*b].score.partial_cmp(&markers[*a].score).expect("finite scores"));
    for index in order {
        let detection = &markers[index];
        let Some(dims) = config.marker_dims.get(&detection.class) else {
            continue;
        };
        let Ok(annotation) = MarkerAnnotation::new(detection.class, detection.obb.corners()) else {
            continue;
        };
        match estimate_scale(&annotation, *dims) {
            Ok(scale) if scale.residual <= config.scale_residual_bound => return Some(scale),
            _ => continue,
        }
    }
    None
}
