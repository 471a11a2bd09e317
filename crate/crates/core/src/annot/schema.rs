//! Annotation dataset JSON, version 1.
//!
//! Layout (all coordinates in pixels, origin top-left, x rightward, y
//! downward):
//!
//! ```json
//! {
//!   "version": 1,
//!   "images": [{
//!     "id": "s00_img_0001_a", "path": "images/s00_img_0001_a.png",
//!     "width": 4240, "height": 2384, "group_id": "s00_beets_0001",
//!     "meta": {"stage": "Sample", "lighting": "Sunny", "moisture": "Dry",
//!              "location": "A", "session": 0},
//!     "regions": [{"class": "Beet", "instance": 0, "polygon": [[x, y], ...]}],
//!     "markers": [{"class": "Ruler", "corners": [[x, y], [x, y], [x, y], [x, y]]}]
//!   }]
//! }
//! ```
//!
//! Ingest clamps out-of-bounds coordinates to the image rectangle, drops
//! regions and markers that are geometrically degenerate after clamping
//! (one warning each) and fails validation on unknown labels, missing
//! `instance`/`group_id` fields or malformed markers.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AnnotatedImage, AnnotatedRegion, Lighting, MarkerAnnotation, MarkerClass, MetaParams,
    Moisture, Polygon, SemanticClass, Stage,
};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct RawDataset {
    version: u32,
    images: Vec<RawImage>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawImage {
    id: String,
    path: String,
    width: u32,
    height: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    group_id: Option<String>,
    meta: RawMeta,
    #[serde(default)]
    regions: Vec<RawRegion>,
    #[serde(default)]
    markers: Vec<RawMarker>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMeta {
    stage: String,
    lighting: String,
    moisture: String,
    location: String,
    session: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRegion {
    class: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    instance: Option<u32>,
    polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMarker {
    class: String,
    corners: Vec<[f64; 2]>,
}

/// Outcome of an ingest: the validated images plus one warning per dropped
/// degenerate region or marker.
#[derive(Debug)]
pub struct LoadResult {
    pub images: Vec<AnnotatedImage>,
    pub warnings: Vec<String>,
}

/// Load and validate an annotation dataset file.
pub fn load_annotations(path: &Path) -> Result<LoadResult> {
    let text = fs::read_to_string(path)?;
    parse_annotations(&text)
}

/// Parse and validate annotation JSON from a string.
pub fn parse_annotations(text: &str) -> Result<LoadResult> {
    let raw: RawDataset = serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    if raw.version != SCHEMA_VERSION {
        return Err(Error::Validation(format!(
            "unsupported schema version {} (expected {})",
            raw.version, SCHEMA_VERSION
        )));
    }

    let mut warnings = Vec::new();
    let mut images = Vec::with_capacity(raw.images.len());
    let mut seen_ids = BTreeSet::new();

    for raw_image in raw.images {
        let image = validate_image(raw_image, &mut warnings)?;
        if !seen_ids.insert(image.image_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate image id `{}`",
                image.image_id
            )));
        }
        images.push(image);
    }

    Ok(LoadResult { images, warnings })
}

fn validate_image(raw: RawImage, warnings: &mut Vec<String>) -> Result<AnnotatedImage> {
    if raw.width == 0 || raw.height == 0 {
        return Err(Error::Validation(format!(
            "image `{}` has empty dimensions {}x{}",
            raw.id, raw.width, raw.height
        )));
    }
    let group_id = raw.group_id.ok_or_else(|| {
        Error::Validation(format!("image `{}` is missing required field `group_id`", raw.id))
    })?;
    let meta = validate_meta(&raw.id, raw.meta)?;

    let w = f64::from(raw.width);
    let h = f64::from(raw.height);
    let clamp = |p: [f64; 2]| [p[0].clamp(0.0, w), p[1].clamp(0.0, h)];

    let mut regions = Vec::with_capacity(raw.regions.len());
    for (index, raw_region) in raw.regions.into_iter().enumerate() {
        let class = SemanticClass::from_name(&raw_region.class).ok_or_else(|| {
            Error::Validation(format!(
                "image `{}` region {index}: unknown class label `{}`",
                raw.id, raw_region.class
            ))
        })?;
        if class == SemanticClass::Bg {
            return Err(Error::Validation(format!(
                "image `{}` region {index}: Bg cannot be annotated explicitly",
                raw.id
            )));
        }
        let instance = raw_region.instance.ok_or_else(|| {
            Error::Validation(format!(
                "image `{}` region {index}: missing required field `instance`",
                raw.id
            ))
        })?;

        let mut vertices: Vec<[f64; 2]> = raw_region.polygon.into_iter().map(clamp).collect();
        dedup_consecutive(&mut vertices);
        match Polygon::new(vertices) {
            Ok(polygon) => regions.push(AnnotatedRegion::new(class, polygon, instance)?),
            Err(e) => warnings.push(format!(
                "image `{}` region {index} ({}) dropped: {e}",
                raw.id,
                class.name()
            )),
        }
    }

    let mut markers = Vec::with_capacity(raw.markers.len());
    for (index, raw_marker) in raw.markers.into_iter().enumerate() {
        let class = MarkerClass::from_name(&raw_marker.class).ok_or_else(|| {
            Error::Validation(format!(
                "image `{}` marker {index}: unknown class label `{}`",
                raw.id, raw_marker.class
            ))
        })?;
        let corners: [[f64; 2]; 4] = raw_marker
            .corners
            .as_slice()
            .try_into()
            .map_err(|_| {
                Error::Validation(format!(
                    "image `{}` marker {index}: expected exactly 4 corners, got {}",
                    raw.id,
                    raw_marker.corners.len()
                ))
            })?;
        let corners = corners.map(clamp);
        match MarkerAnnotation::new(class, corners) {
            Ok(marker) => markers.push(marker),
            Err(e) => warnings.push(format!(
                "image `{}` marker {index} ({}) dropped: {e}",
                raw.id,
                class.name()
            )),
        }
    }

    Ok(AnnotatedImage {
        image_id: raw.id,
        path: raw.path,
        width: raw.width,
        height: raw.height,
        group_id,
        meta,
        regions,
        markers,
    })
}

fn validate_meta(image_id: &str, raw: RawMeta) -> Result<MetaParams> {
    let stage = Stage::from_name(&raw.stage).ok_or_else(|| {
        Error::Validation(format!("image `{image_id}`: unknown stage `{}`", raw.stage))
    })?;
    let lighting = Lighting::from_name(&raw.lighting).ok_or_else(|| {
        Error::Validation(format!("image `{image_id}`: unknown lighting `{}`", raw.lighting))
    })?;
    let moisture = Moisture::from_name(&raw.moisture).ok_or_else(|| {
        Error::Validation(format!("image `{image_id}`: unknown moisture `{}`", raw.moisture))
    })?;
    Ok(MetaParams {
        stage,
        lighting,
        moisture,
        location: raw.location,
        session_id: raw.session,
    })
}

/// Remove consecutive duplicate vertices, including the closing pair.
fn dedup_consecutive(vertices: &mut Vec<[f64; 2]>) {
    vertices.dedup();
    while vertices.len() > 1 && vertices.first() == vertices.last() {
        vertices.pop();
    }
}

/// Serialize images back into schema JSON.
pub fn to_json(images: &[AnnotatedImage]) -> String {
    let raw = RawDataset {
        version: SCHEMA_VERSION,
        images: images
            .iter()
            .map(|image| RawImage {
                id: image.image_id.clone(),
                path: image.path.clone(),
                width: image.width,
                height: image.height,
                group_id: Some(image.group_id.clone()),
                meta: RawMeta {
                    stage: image.meta.stage.name().to_string(),
                    lighting: image.meta.lighting.name().to_string(),
                    moisture: image.meta.moisture.name().to_string(),
                    location: image.meta.location.clone(),
                    session: image.meta.session_id,
                },
                regions: image
                    .regions
                    .iter()
                    .map(|region| RawRegion {
                        class: region.class().name().to_string(),
                        instance: Some(region.instance_id()),
                        polygon: region.polygon().vertices().to_vec(),
                    })
                    .collect(),
                markers: image
                    .markers
                    .iter()
                    .map(|marker| RawMarker {
                        class: marker.class().name().to_string(),
                        corners: marker.corners().to_vec(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("schema types always serialize")
}

/// Write images as a schema JSON file.
pub fn save_annotations(images: &[AnnotatedImage], path: &Path) -> Result<()> {
    fs::write(path, to_json(images))?;
    Ok(())
}

/// Byte offset of a 1-based (line, column) position reported by serde_json.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len() + 1;
    }
    text.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta_block() -> &'static str {
        r#"{"stage": "Sample", "lighting": "Sunny", "moisture": "Dry", "location": "A", "session": 0}"#
    }

    fn image_json(id: &str, regions: &str, markers: &str) -> String {
        format!(
            r#"{{"id": "{id}", "path": "images/{id}.png", "width": 100, "height": 80,
                "group_id": "g_{id}", "meta": {meta},
                "regions": [{regions}], "markers": [{markers}]}}"#,
            meta = meta_block()
        )
    }

    fn dataset_json(images: &[String]) -> String {
        format!(r#"{{"version": 1, "images": [{}]}}"#, images.join(","))
    }

    const TRIANGLE: &str =
        r#"{"class": "Beet", "instance": 0, "polygon": [[10, 10], [40, 10], [10, 40]]}"#;

    #[test]
    fn well_formed_file_round_trips() {
        let regions_a = [
            TRIANGLE.to_string(),
            r#"{"class": "Soil", "instance": 0, "polygon": [[12, 12], [20, 12], [12, 20]]}"#.to_string(),
            r#"{"class": "Cut", "instance": 1, "polygon": [[50, 50], [60, 50], [50, 60]]}"#.to_string(),
        ]
        .join(",");
        let regions_b = [
            r#"{"class": "Rot", "instance": 2, "polygon": [[5, 5], [9, 5], [5, 9]]}"#.to_string(),
            r#"{"class": "Dmg", "instance": 2, "polygon": [[30, 30], [34, 30], [30, 34]]}"#.to_string(),
            r#"{"class": "Leaf", "instance": 3, "polygon": [[70, 8], [80, 8], [70, 18]]}"#.to_string(),
        ]
        .join(",");
        let marker = r#"{"class": "Ruler", "corners": [[1, 1], [20, 1], [20, 6], [1, 6]]}"#;
        let text = dataset_json(&[
            image_json("a", &regions_a, marker),
            image_json("b", &regions_b, ""),
        ]);

        let result = parse_annotations(&text).unwrap();
        assert_eq!(result.images.len(), 2);
        assert!(result.warnings.is_empty());
        let total_regions: usize = result.images.iter().map(|i| i.regions.len()).sum();
        assert_eq!(total_regions, 6);

        // serialize(load(x)) parses to an equal object graph
        let reparsed = parse_annotations(&to_json(&result.images)).unwrap();
        assert_eq!(reparsed.images, result.images);
    }

    #[test]
    fn two_vertex_polygon_is_dropped_with_one_warning() {
        let region = r#"{"class": "Beet", "instance": 0, "polygon": [[0, 0], [10, 10]]}"#;
        let text = dataset_json(&[image_json("a", region, "")]);
        let result = parse_annotations(&text).unwrap();
        assert_eq!(result.images[0].regions.len(), 0);
        assert_eq!(result.warnings.len(), 1);
        assert!(result.warnings[0].contains("dropped"));
    }

    #[test]
    fn storage_fixture_carries_its_classes() {
        // hand-built fixture mirroring one Storage image, validated by
        // serialize/parse round-trip
        let regions = [
            r#"{"class": "Beet", "instance": 0, "polygon": [[10, 10], [60, 10], [60, 60], [10, 60]]}"#,
            r#"{"class": "Soil", "instance": 0, "polygon": [[15, 15], [25, 15], [25, 25], [15, 25]]}"#,
            r#"{"class": "Rot", "instance": 0, "polygon": [[40, 40], [55, 40], [55, 55], [40, 55]]}"#,
        ]
        .join(",");
        let text = format!(
            r#"{{"version": 1, "images": [{{"id": "st", "path": "st.png", "width": 100, "height": 80,
                "group_id": "g0",
                "meta": {{"stage": "Storage", "lighting": "Artificial", "moisture": "Wet",
                          "location": "E", "session": 9}},
                "regions": [{regions}], "markers": []}}]}}"#
        );
        let result = parse_annotations(&text).unwrap();
        let classes: Vec<SemanticClass> =
            result.images[0].regions.iter().map(|r| r.class()).collect();
        assert_eq!(
            classes,
            vec![SemanticClass::Beet, SemanticClass::Soil, SemanticClass::Rot]
        );
        assert_eq!(result.images[0].meta.stage, Stage::Storage);
        let reparsed = parse_annotations(&to_json(&result.images)).unwrap();
        assert_eq!(reparsed.images, result.images);
    }

    #[test]
    fn unknown_class_label_is_named() {
        let region = r#"{"class": "Weed", "instance": 0, "polygon": [[0, 0], [1, 0], [0, 1]]}"#;
        let text = dataset_json(&[image_json("a", region, "")]);
        let err = parse_annotations(&text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("Weed"));
    }

    #[test]
    fn marker_with_wrong_corner_count_fails() {
        let marker = r#"{"class": "Sign", "corners": [[0, 0], [10, 0], [10, 10]]}"#;
        let text = dataset_json(&[image_json("a", TRIANGLE, marker)]);
        let err = parse_annotations(&text).unwrap_err();
        assert!(err.to_string().contains("4 corners"));
    }

    #[test]
    fn malformed_json_reports_byte_offset() {
        let text = "{\"version\": 1,\n \"images\": [}]}";
        let err = parse_annotations(text).unwrap_err();
        match err {
            Error::Parse { offset, .. } => {
                assert_eq!(&text[offset..offset + 1], "}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_group_id_fails_validation() {
        let text = format!(
            r#"{{"version": 1, "images": [{{"id": "a", "path": "a.png", "width": 10, "height": 10,
                "meta": {meta}, "regions": [], "markers": []}}]}}"#,
            meta = meta_block()
        );
        let err = parse_annotations(&text).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("group_id"));
    }

    #[test]
    fn missing_instance_fails_validation() {
        let region = r#"{"class": "Beet", "polygon": [[0, 0], [1, 0], [0, 1]]}"#;
        let text = dataset_json(&[image_json("a", region, "")]);
        let err = parse_annotations(&text).unwrap_err();
        assert!(err.to_string().contains("instance"));
    }

    #[test]
    fn out_of_bounds_vertices_are_clamped() {
        let region =
            r#"{"class": "Beet", "instance": 0, "polygon": [[-5, 10], [40, -3], [140, 40], [40, 95]]}"#;
        let text = dataset_json(&[image_json("a", region, "")]);
        let result = parse_annotations(&text).unwrap();
        let polygon = result.images[0].regions[0].polygon();
        assert_eq!(
            polygon.vertices(),
            &[[0.0, 10.0], [40.0, 0.0], [100.0, 40.0], [40.0, 80.0]]
        );
    }

    #[test]
    fn clamping_can_degenerate_a_polygon() {
        // every vertex beyond the right edge collapses onto x = 100
        let region =
            r#"{"class": "Beet", "instance": 0, "polygon": [[120, 0], [130, 10], [125, 20]]}"#;
        let text = dataset_json(&[image_json("a", region, "")]);
        let result = parse_annotations(&text).unwrap();
        assert!(result.images[0].regions.is_empty());
        assert_eq!(result.warnings.len(), 1);
    }

    #[test]
    fn duplicate_image_ids_fail() {
        let text = dataset_json(&[image_json("a", TRIANGLE, ""), image_json("a", "", "")]);
        assert!(parse_annotations(&text).is_err());
    }

    #[test]
    fn wrong_version_fails() {
        let text = r#"{"version": 2, "images": []}"#;
        assert!(matches!(parse_annotations(text), Err(Error::Validation(_))));
    }
}
