//! Pluggable inference backends for the two-stage pipeline: stage-1
//! instance segmentation, stage-2 patch segmentation and marker
//! detection.
//!
//! Two implementations ship with the toolkit: [`OracleBackend`], which
//! answers from ground-truth annotations (the test harness and upper
//! bound), and [`ExternalBackend`], which drives a model process over a
//! line-delimited JSON protocol.
//!
//! A backend instance is single-threaded; run several instances for
//! parallelism.

mod adapter;
mod oracle;

pub use adapter::{AdapterConfig, ExternalBackend};
pub use oracle::OracleBackend;

use std::path::PathBuf;

use crate::annot::MarkerClass;
use crate::error::{Error, Result};
use crate::geometry::{AxisAlignedBox, BinaryMask, OrientedBox, SemanticMask};
use crate::pipeline::PatchTransform;
use crate::raster::RgbRaster;

/// Identity and dimensions of an image to run inference on. The path is
/// how external adapters find the pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageHandle {
    pub image_id: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

/// One stage-1 detection: full-image silhouette mask, box and confidence.
#[derive(Debug, Clone)]
pub struct InstancePrediction {
    pub mask: BinaryMask,
    pub bbox: AxisAlignedBox,
    pub score: f64,
}

/// One detected reference marker.
#[derive(Debug, Clone)]
pub struct OrientedDetection {
    pub obb: OrientedBox,
    pub class: MarkerClass,
    pub score: f64,
}

/// A stage-2 request: the letterboxed patch raster plus where it came
/// from.
#[derive(Debug)]
pub struct PatchQuery<'a> {
    pub image: &'a ImageHandle,
    pub raster: &'a RgbRaster,
    pub transform: &'a PatchTransform,
}

pub trait InstanceSegmenter {
    fn instances(&mut self, image: &ImageHandle) -> Result<Vec<InstancePrediction>>;
}

pub trait PatchSegmenter {
    /// Returns a semantic mask with the same dimensions as the patch.
    fn segment_patch(&mut self, query: &PatchQuery<'_>) -> Result<SemanticMask>;
}

pub trait MarkerDetector {
    fn markers(&mut self, image: &ImageHandle) -> Result<Vec<OrientedDetection>>;
}

/// The three interfaces the pipeline needs, usually implemented by one
/// backend object.
pub trait InspectionBackend: InstanceSegmenter + PatchSegmenter + MarkerDetector {}

impl<T: InstanceSegmenter + PatchSegmenter + MarkerDetector + ?Sized> InspectionBackend for T {}

/// Check stage-1 predictions against the interface invariants.
pub fn validate_instances(predictions: &[InstancePrediction], image: &ImageHandle) -> Result<()> {
    for (index, prediction) in predictions.iter().enumerate() {
        if (prediction.mask.width(), prediction.mask.height()) != (image.width, image.height) {
            return Err(Error::Validation(format!(
                "instance {index}: mask is {}x{}, image is {}x{}",
                prediction.mask.width(),
                prediction.mask.height(),
                image.width,
                image.height
            )));
        }
        if !(0.0..=1.0).contains(&prediction.score) {
            return Err(Error::Validation(format!(
                "instance {index}: confidence {} outside [0, 1]",
                prediction.score
            )));
        }
        let b = &prediction.bbox;
        if b.x_min < 0.0
            || b.y_min < 0.0
            || b.x_max > f64::from(image.width)
            || b.y_max > f64::from(image.height)
        {
            return Err(Error::Validation(format!(
                "instance {index}: box {:?} outside the image",
                b.as_array()
            )));
        }
    }
    Ok(())
}

/// Check marker detections against the interface invariants.
pub fn validate_markers(detections: &[OrientedDetection]) -> Result<()> {
    for (index, detection) in detections.iter().enumerate() {
        if !(0.0..=1.0).contains(&detection.score) {
            return Err(Error::Validation(format!(
                "marker {index}: confidence {} outside [0, 1]",
                detection.score
            )));
        }
    }
    Ok(())
}

/// Check a stage-2 answer against the declared patch size.
pub fn validate_patch_mask(mask: &SemanticMask, transform: &PatchTransform) -> Result<()> {
    if (mask.width(), mask.height()) != (transform.target_w, transform.target_h) {
        return Err(Error::Validation(format!(
            "patch mask is {}x{}, expected {}x{}",
            mask.width(),
            mask.height(),
            transform.target_w,
            transform.target_h
        )));
    }
    Ok(())
}
