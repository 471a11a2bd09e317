//! Domain types for annotated beet images plus ingestion, dataset splits and
//! dataset statistics.
//!
//! All types are immutable after construction and safe to share across
//! threads; the operations in the submodules are pure functions.

mod schema;
mod split;
mod stats;

pub use schema::{load_annotations, parse_annotations, save_annotations, to_json, LoadResult};
pub use split::{make_split, DatasetSplit};
pub use stats::{
    dataset_stats, label_pixel_distribution, ImagePixelCounts, LabelDistribution, StageRow,
    StatsTable,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven semantic classes, with fixed indices 0..6.
///
/// The index mapping is stable across every file format in the toolkit:
/// mask PNGs, annotation JSON and report JSON all agree on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SemanticClass {
    Bg = 0,
    Beet = 1,
    Cut = 2,
    Leaf = 3,
    Soil = 4,
    Dmg = 5,
    Rot = 6,
}

impl SemanticClass {
    pub const COUNT: usize = 7;

    /// All classes in index order.
    pub const ALL: [SemanticClass; 7] = [
        SemanticClass::Bg,
        SemanticClass::Beet,
        SemanticClass::Cut,
        SemanticClass::Leaf,
        SemanticClass::Soil,
        SemanticClass::Dmg,
        SemanticClass::Rot,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: u8) -> Option<SemanticClass> {
        SemanticClass::ALL.get(index as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Bg => "Bg",
            SemanticClass::Beet => "Beet",
            SemanticClass::Cut => "Cut",
            SemanticClass::Leaf => "Leaf",
            SemanticClass::Soil => "Soil",
            SemanticClass::Dmg => "Dmg",
            SemanticClass::Rot => "Rot",
        }
    }

    pub fn from_name(name: &str) -> Option<SemanticClass> {
        SemanticClass::ALL.iter().copied().find(|c| c.name() == name)
    }
}

/// The two classes of scale reference markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MarkerClass {
    Ruler,
    Sign,
}

impl MarkerClass {
    pub fn name(self) -> &'static str {
        match self {
            MarkerClass::Ruler => "Ruler",
            MarkerClass::Sign => "Sign",
        }
    }

    pub fn from_name(name: &str) -> Option<MarkerClass> {
        match name {
            "Ruler" => Some(MarkerClass::Ruler),
            "Sign" => Some(MarkerClass::Sign),
            _ => None,
        }
    }
}

/// A closed 2D contour in pixel coordinates.
///
/// The contour is implicitly closed from the last vertex back to the first.
/// Construction rejects degenerate contours: fewer than three vertices,
/// consecutive duplicate vertices (including the closing pair) or zero
/// signed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Polygon> {
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for i in 0..vertices.len() {
            let next = vertices[(i + 1) % vertices.len()];
            if vertices[i] == next {
                return Err(Error::Geometry(format!(
                    "consecutive duplicate vertex at index {i}"
                )));
            }
        }
        if signed_area(&vertices) == 0.0 {
            return Err(Error::Geometry("polygon has zero area".into()));
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Axis-aligned extent as (x_min, y_min, x_max, y_max).
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            b.0 = b.0.min(v[0]);
            b.1 = b.1.min(v[1]);
            b.2 = b.2.max(v[0]);
            b.3 = b.3.max(v[1]);
        }
        b
    }
}

/// Shoelace signed area of a closed vertex loop (positive for one winding,
/// negative for the other).
pub(crate) fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let mut sum = 0.0;
    for i in 0..n {
        let [x0, y0] = vertices[i];
        let [x1, y1] = vertices[(i + 1) % n];
        sum += x0 * y1 - x1 * y0;
    }
    sum / 2.0
}

/// A reference marker annotated by its four corner points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerAnnotation {
    class: MarkerClass,
    corners: [[f64; 2]; 4],
}

impl MarkerAnnotation {
    /// The corner quadrilateral must be strictly convex (which implies a
    /// positive area) in a consistent winding order.
    pub fn new(class: MarkerClass, corners: [[f64; 2]; 4]) -> Result<MarkerAnnotation> {
        let mut sign = 0.0f64;
        for i in 0..4 {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            let c = corners[(i + 2) % 4];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross == 0.0 {
                return Err(Error::Geometry("marker corners are collinear".into()));
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return Err(Error::Geometry("marker corner quadrilateral is not convex".into()));
            }
        }
        Ok(MarkerAnnotation { class, corners })
    }

    pub fn class(&self) -> MarkerClass {
        self.class
    }

    pub fn corners(&self) -> &[[f64; 2]; 4] {
        &self.corners
    }
}

/// One labeled polygon of a beet. The background class is the implicit
/// complement of all regions and is never annotated explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedRegion {
    class: SemanticClass,
    polygon: Polygon,
    instance_id: u32,
}

impl AnnotatedRegion {
    pub fn new(class: SemanticClass, polygon: Polygon, instance_id: u32) -> Result<AnnotatedRegion> {
        if class == SemanticClass::Bg {
            return Err(Error::Validation(
                "regions cannot carry the Bg class; background is implicit".into(),
            ));
        }
        Ok(AnnotatedRegion {
            class,
            polygon,
            instance_id,
        })
    }

    pub fn class(&self) -> SemanticClass {
        self.class
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    /// Groups regions that belong to the same physical beet.
    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Sample,
    Harvest,
    Storage,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Sample, Stage::Harvest, Stage::Storage];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Sample => "Sample",
            Stage::Harvest => "Harvest",
            Stage::Storage => "Storage",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.iter().copied().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lighting {
    Sunny,
    Diffuse,
    Artificial,
}

impl Lighting {
    pub const ALL: [Lighting; 3] = [Lighting::Sunny, Lighting::Diffuse, Lighting::Artificial];

    pub fn name(self) -> &'static str {
        match self {
            Lighting::Sunny => "Sunny",
            Lighting::Diffuse => "Diffuse",
            Lighting::Artificial => "Artificial",
        }
    }

    pub fn from_name(name: &str) -> Option<Lighting> {
        Lighting::ALL.iter().copied().find(|l| l.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Moisture {
    Dry,
    Wet,
}

impl Moisture {
    pub const ALL: [Moisture; 2] = [Moisture::Dry, Moisture::Wet];

    pub fn name(self) -> &'static str {
        match self {
            Moisture::Dry => "Dry",
            Moisture::Wet => "Wet",
        }
    }

    pub fn from_name(name: &str) -> Option<Moisture> {
        Moisture::ALL.iter().copied().find(|m| m.name() == name)
    }
}

/// Acquisition conditions recorded per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaParams {
    pub stage: Stage,
    pub lighting: Lighting,
    pub moisture: Moisture,
    pub location: String,
    pub session_id: u32,
}

/// One annotated image: metadata, labeled regions and reference markers.
///
/// All polygon vertices and marker corners lie within
/// `[0, width] x [0, height]`; out-of-bounds coordinates are clamped at
/// ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image_id: String,
    pub path: String,
    pub width: u32,
    pub height: u32,
    /// Shared by images showing different sides of the same beets.
    pub group_id: String,
    pub meta: MetaParams,
    pub regions: Vec<AnnotatedRegion>,
    pub markers: Vec<MarkerAnnotation>,
}

impl AnnotatedImage {
    /// Distinct instance ids present in this image.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.regions.iter().map(|r| r.instance_id()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}
