//! Ground-truth backend: answers every query from annotations. Used as
//! the pipeline test harness and as the upper bound any model backend is
//! measured against.

use std::collections::BTreeMap;

use super::{
    ImageHandle, InstancePrediction, InstanceSegmenter, MarkerDetector, OrientedDetection,
    PatchQuery, PatchSegmenter,
};
use crate::annot::{AnnotatedImage, SemanticClass};
use crate::error::{Error, Result};
use crate::geometry::{obb_from_corners, rasterize, rasterize_polygon, SemanticMask};
use crate::synthesis::synthesize_instances;

/// Deterministic, idempotent backend over a set of annotated images.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    images: BTreeMap<String, AnnotatedImage>,
    mask_cache: BTreeMap<String, SemanticMask>,
}

impl OracleBackend {
    pub fn new(images: impl IntoIterator<Item = AnnotatedImage>) -> OracleBackend {
        OracleBackend {
            images: images
                .into_iter()
                .map(|image| (image.image_id.clone(), image))
                .collect(),
            mask_cache: BTreeMap::new(),
        }
    }

    fn annotated(&self, image_id: &str) -> Result<&AnnotatedImage> {
        self.images
            .get(image_id)
            .ok_or_else(|| Error::Validation(format!("unknown image id `{image_id}`")))
    }

    fn gt_mask(&mut self, image_id: &str) -> Result<&SemanticMask> {
        if !self.mask_cache.contains_key(image_id) {
            let image = self.annotated(image_id)?;
            let mask = rasterize(&image.regions, image.width, image.height);
            self.mask_cache.insert(image_id.to_string(), mask);
        }
        Ok(&self.mask_cache[image_id])
    }
}

impl InstanceSegmenter for OracleBackend {
    fn instances(&mut self, image: &ImageHandle) -> Result<Vec<InstancePrediction>> {
        let annotated = self.annotated(&image.image_id)?;
        let (instances, _) = synthesize_instances(annotated);
        let mut predictions = Vec::with_capacity(instances.len());
        for instance in instances {
            let mask = rasterize_polygon(instance.polygon.vertices(), annotated.width, annotated.height);
            let Some(bbox) = mask.bbox() else {
                // silhouette thinner than a pixel; nothing to segment
                continue;
            };
            predictions.push(InstancePrediction {
                mask,
                bbox,
                score: 1.0,
            });
        }
        Ok(predictions)
    }
}

impl PatchSegmenter for OracleBackend {
    /// The ground-truth mask cropped and resampled exactly like the patch
    /// itself; letterbox borders come back as `Bg`.
    fn segment_patch(&mut self, query: &PatchQuery<'_>) -> Result<SemanticMask> {
        let transform = query.transform;
        let gt = self.gt_mask(&query.image.image_id)?;
        let (cx0, cy0, cx1, cy1) = transform.content_region();
        let mut mask = SemanticMask::filled(transform.target_w, transform.target_h, SemanticClass::Bg);
        let max_x = gt.width() - 1;
        let max_y = gt.height() - 1;
        for py in 0..transform.target_h {
            let center_y = f64::from(py) + 0.5;
            if center_y < cy0 || center_y >= cy1 {
                continue;
            }
            for px in 0..transform.target_w {
                let center_x = f64::from(px) + 0.5;
                if center_x < cx0 || center_x >= cx1 {
                    continue;
                }
                let [ix, iy] = transform.inverse([center_x, center_y]);
                let sx = (ix.floor().max(0.0) as u32).min(max_x);
                let sy = (iy.floor().max(0.0) as u32).min(max_y);
                let value = gt.get(sx, sy);
                mask.set(px, py, SemanticClass::from_index(value).expect("valid gt mask"));
            }
        }
        Ok(mask)
    }
}

impl MarkerDetector for OracleBackend {
    fn markers(&mut self, image: &ImageHandle) -> Result<Vec<OrientedDetection>> {
        let annotated = self.annotated(&image.image_id)?;
        annotated
            .markers
            .iter()
            .map(|marker| {
                Ok(OrientedDetection {
                    obb: obb_from_corners(marker.corners())?,
                    class: marker.class(),
                    score: 1.0,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annot::{
        AnnotatedRegion, Lighting, MarkerAnnotation, MarkerClass, MetaParams, Moisture, Polygon,
        Stage,
    };
    use crate::geometry::mask_iou;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).unwrap()
    }

    fn fixture() -> AnnotatedImage {
        AnnotatedImage {
            image_id: "fx".into(),
            path: "fx.png".into(),
            width: 120,
            height: 90,
            group_id: "g".into(),
            meta: MetaParams {
                stage: Stage::Sample,
                lighting: Lighting::Sunny,
                moisture: Moisture::Dry,
                location: "A".into(),
                session_id: 0,
            },
            regions: vec![
                AnnotatedRegion::new(SemanticClass::Beet, rect(10.0, 10.0, 50.0, 40.0), 0).unwrap(),
                AnnotatedRegion::new(SemanticClass::Rot, rect(40.0, 15.0, 60.0, 35.0), 0).unwrap(),
                AnnotatedRegion::new(SemanticClass::Beet, rect(70.0, 50.0, 110.0, 80.0), 1).unwrap(),
            ],
            markers: vec![
                MarkerAnnotation::new(
                    MarkerClass::Ruler,
                    [[5.0, 70.0], [25.0, 70.0], [25.0, 75.0], [5.0, 75.0]],
                )
                .unwrap(),
                MarkerAnnotation::new(
                    MarkerClass::Sign,
                    [[100.0, 5.0], [115.0, 5.0], [115.0, 15.0], [100.0, 15.0]],
                )
                .unwrap(),
            ],
        }
    }

    fn handle() -> ImageHandle {
        ImageHandle {
            image_id: "fx".into(),
            path: "fx.png".into(),
            width: 120,
            height: 90,
        }
    }

    #[test]
    fn oracle_instances_cover_their_own_ground_truth() {
        let mut oracle = OracleBackend::new([fixture()]);
        let predictions = oracle.instances(&handle()).unwrap();
        assert_eq!(predictions.len(), 2);
        assert!(predictions.iter().all(|p| p.score == 1.0));
        // stage-1 recall 1.0 against its own ground truth
        let (instances, _) = synthesize_instances(&fixture());
        for instance in instances {
            let gt_mask = rasterize_polygon(instance.polygon.vertices(), 120, 90);
            let best = predictions
                .iter()
                .map(|p| mask_iou(&p.mask, &gt_mask).unwrap())
                .fold(0.0, f64::max);
            assert_eq!(best, 1.0);
        }
    }

    #[test]
    fn oracle_markers_match_min_rect_of_corners() {
        let mut oracle = OracleBackend::new([fixture()]);
        let detections = oracle.markers(&handle()).unwrap();
        assert_eq!(detections.len(), 2);
        for (detection, marker) in detections.iter().zip(&fixture().markers) {
            let expected = obb_from_corners(marker.corners()).unwrap();
            assert_eq!(detection.obb, expected);
            assert_eq!(detection.class, marker.class());
            assert_eq!(detection.score, 1.0);
        }
    }

    #[test]
    fn unknown_image_is_an_error() {
        let mut oracle = OracleBackend::new([fixture()]);
        let mut other = handle();
        other.image_id = "missing".into();
        assert!(oracle.instances(&other).is_err());
        assert!(oracle.markers(&other).is_err());
    }

    #[test]
    fn oracle_is_deterministic() {
        let mut oracle = OracleBackend::new([fixture()]);
        let first = oracle.instances(&handle()).unwrap();
        let second = oracle.instances(&handle()).unwrap();
        assert_eq!(first.len(), second.len());
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.mask, b.mask);
            assert_eq!(a.bbox, b.bbox);
        }
    }
}
