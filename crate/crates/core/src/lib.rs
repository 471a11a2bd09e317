//! Core library of the beetscan toolkit: annotation handling, polygon and
//! raster geometry, segmentation/detection metrics, pluggable inference
//! backends and the two-stage inspection pipeline for post-harvest sugar
//! beets.

pub mod annot;
pub mod backends;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod synthesis;

pub use annot::{
    AnnotatedImage, AnnotatedRegion, DatasetSplit, MarkerAnnotation, MarkerClass, MetaParams,
    Polygon, SemanticClass, Stage,
};
pub use backends::{ImageHandle, InspectionBackend, OracleBackend};
pub use error::{Error, Result};
pub use geometry::{
    AxisAlignedBox, BinaryMask, MarkerDims, OrientedBox, ScaleEstimate, SemanticMask,
};
pub use pipeline::{InspectConfig, InspectionReport, MassModel, PatchTier, PatchTransform};
pub use raster::RgbRaster;
