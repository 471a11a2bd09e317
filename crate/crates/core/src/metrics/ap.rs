//! COCO-style average precision over boxes, binary masks and oriented
//! boxes.
//!
//! Detections are matched greedily in descending confidence order (ties
//! broken by stable input order) against the unmatched ground truth with
//! the highest IoU. AP is the mean of the 101-point interpolated
//! precision; mAP50-95 averages the ten thresholds 0.50, 0.55, ..., 0.95.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{aabb_iou, mask_iou, obb_iou, AxisAlignedBox, BinaryMask, OrientedBox};

/// The ten COCO evaluation thresholds.
pub const COCO_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

const RECALL_POINTS: usize = 101;

/// Detection or ground-truth geometry; IoU is only defined between equal
/// kinds.
#[derive(Debug, Clone)]
pub enum DetGeometry {
    Box(AxisAlignedBox),
    Mask(BinaryMask),
    Obb(OrientedBox),
}

/// IoU between two geometries of the same kind.
pub fn geometry_iou(a: &DetGeometry, b: &DetGeometry) -> Result<f64> {
    match (a, b) {
        (DetGeometry::Box(a), DetGeometry::Box(b)) => Ok(aabb_iou(a, b)),
        (DetGeometry::Mask(a), DetGeometry::Mask(b)) => mask_iou(a, b),
        (DetGeometry::Obb(a), DetGeometry::Obb(b)) => Ok(obb_iou(a, b)),
        _ => Err(Error::Metrics("mixed geometry kinds in IoU computation".into())),
    }
}

/// A scored detection.
#[derive(Debug, Clone)]
pub struct Detection {
    pub geometry: DetGeometry,
    pub class: String,
    pub score: f64,
}

/// One ground-truth object.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub geometry: DetGeometry,
    pub class: String,
}

/// Detections and ground truths of one image.
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub detections: Vec<Detection>,
    pub ground_truths: Vec<GroundTruth>,
}

/// Precision/recall curve with its 101-point interpolation.
#[derive(Debug, Clone, Serialize)]
pub struct PrCurve {
    /// One `(recall, precision)` point per detection, in match order.
    pub points: Vec<(f64, f64)>,
    /// Interpolated precision at recalls 0.00, 0.01, ..., 1.00.
    pub interpolated: Vec<f64>,
}

impl PrCurve {
    /// Mean of the interpolated precision values.
    pub fn ap(&self) -> f64 {
        self.interpolated.iter().sum::<f64>() / self.interpolated.len() as f64
    }

    fn from_matches(matches: &[(f64, bool)], num_gt: usize) -> PrCurve {
        let mut points = Vec::with_capacity(matches.len());
        let mut tp = 0u64;
        let mut fp = 0u64;
        for (_, is_tp) in matches {
            if *is_tp {
                tp += 1;
            } else {
                fp += 1;
            }
            points.push((tp as f64 / num_gt as f64, tp as f64 / (tp + fp) as f64));
        }
        // right-to-left precision envelope over the recall axis
        let mut envelope: Vec<f64> = points.iter().map(|(_, p)| *p).collect();
        for i in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[i] = envelope[i].max(envelope[i + 1]);
        }
        let mut interpolated = vec![0.0; RECALL_POINTS];
        let mut cursor = 0usize;
        for (i, slot) in interpolated.iter_mut().enumerate() {
            let recall = i as f64 / (RECALL_POINTS - 1) as f64;
            while cursor < points.len() && points[cursor].0 < recall {
                cursor += 1;
            }
            if cursor < points.len() {
                *slot = envelope[cursor];
            }
        }
        PrCurve { points, interpolated }
    }
}

/// Detection indices in descending score order, ties by input order.
fn score_order(detections: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|a, b| {
        detections[*b]
            .score
            .partial_cmp(&detections[*a].score)
            .expect("finite scores")
    });
    order
}

/// Greedy matching of one scene at one threshold; returns `(score, tp)`
/// per detection in descending score order.
fn match_scene(scene: &Scene, class: &str, threshold: f64, matches: &mut Vec<(f64, bool)>) -> Result<usize> {
    let detections: Vec<&Detection> = scene
        .detections
        .iter()
        .filter(|d| d.class == class)
        .collect();
    let gts: Vec<&GroundTruth> = scene
        .ground_truths
        .iter()
        .filter(|g| g.class == class)
        .collect();
    for det in &detections {
        if !(0.0..=1.0).contains(&det.score) {
            return Err(Error::Metrics(format!(
                "detection score {} outside [0, 1]",
                det.score
            )));
        }
    }
    let owned: Vec<Detection> = detections.iter().map(|d| (*d).clone()).collect();
    let order = score_order(&owned);
    let mut gt_taken = vec![false; gts.len()];
    for index in order {
        let det = &owned[index];
        let mut best: Option<(usize, f64)> = None;
        for (gt_index, gt) in gts.iter().enumerate() {
            if gt_taken[gt_index] {
                continue;
            }
            let iou = geometry_iou(&det.geometry, &gt.geometry)?;
            if iou >= threshold && best.is_none_or(|(_, best_iou)| iou > best_iou) {
                best = Some((gt_index, iou));
            }
        }
        let matched = if let Some((gt_index, _)) = best {
            gt_taken[gt_index] = true;
            true
        } else {
            false
        };
        matches.push((det.score, matched));
    }
    Ok(gts.len())
}

/// Build the PR curve of a single-class scene at one IoU threshold.
pub fn pr_curve(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Result<PrCurve> {
    let class = require_single_class(dets, gts)?;
    let scene = Scene {
        detections: dets.to_vec(),
        ground_truths: gts.to_vec(),
    };
    let mut matches = Vec::new();
    let num_gt = match_scene(&scene, &class, check_threshold(iou_threshold)?, &mut matches)?;
    if num_gt == 0 {
        // no curve exists; interpolated values encode the AP edge rule
        let value = if matches.is_empty() { 1.0 } else { 0.0 };
        return Ok(PrCurve {
            points: Vec::new(),
            interpolated: vec![value; RECALL_POINTS],
        });
    }
    Ok(PrCurve::from_matches(&matches, num_gt))
}

/// Average precision of a single-class scene at one IoU threshold.
///
/// With no ground truths, AP is 1.0 for an empty detection list and 0.0
/// otherwise.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Result<f64> {
    Ok(pr_curve(dets, gts, iou_threshold)?.ap())
}

fn check_threshold(threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Metrics(format!(
            "IoU threshold {threshold} outside (0, 1]"
        )));
    }
    Ok(threshold)
}

fn require_single_class(dets: &[Detection], gts: &[GroundTruth]) -> Result<String> {
    let classes: BTreeSet<&str> = dets
        .iter()
        .map(|d| d.class.as_str())
        .chain(gts.iter().map(|g| g.class.as_str()))
        .collect();
    if classes.len() > 1 {
        return Err(Error::Metrics(format!(
            "expected a single class, got {classes:?}; use the mAP functions for multi-class input"
        )));
    }
    Ok(classes.into_iter().next().unwrap_or("").to_string())
}

/// Per-class mAP50-95 plus the class mean, the layout of detection result
/// tables.
#[derive(Debug, Clone, Serialize)]
pub struct ApTable {
    pub per_class: Vec<(String, f64)>,
    pub mean: f64,
}

/// mAP50-95 over any number of images; classes are evaluated separately
/// and averaged.
pub fn dataset_map_50_95(scenes: &[Scene]) -> Result<ApTable> {
    let classes: BTreeSet<String> = scenes
        .iter()
        .flat_map(|scene| {
            scene
                .detections
                .iter()
                .map(|d| d.class.clone())
                .chain(scene.ground_truths.iter().map(|g| g.class.clone()))
        })
        .collect();
    if classes.is_empty() {
        // nothing predicted, nothing to find
        return Ok(ApTable {
            per_class: Vec::new(),
            mean: 1.0,
        });
    }

    let mut per_class = Vec::with_capacity(classes.len());
    for class in classes {
        let mut threshold_sum = 0.0;
        for threshold in COCO_THRESHOLDS {
            let mut matches = Vec::new();
            let mut num_gt = 0usize;
            for scene in scenes {
                num_gt += match_scene(scene, &class, threshold, &mut matches)?;
            }
            let ap = if num_gt == 0 {
                if matches.is_empty() {
                    1.0
                } else {
                    0.0
                }
            } else {
                // global ranking across images; stable sort keeps the
                // scene-then-input tie order deterministic
                matches.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
                PrCurve::from_matches(&matches, num_gt).ap()
            };
            threshold_sum += ap;
        }
        per_class.push((class, threshold_sum / COCO_THRESHOLDS.len() as f64));
    }
    let mean = per_class.iter().map(|(_, ap)| ap).sum::<f64>() / per_class.len() as f64;
    Ok(ApTable { per_class, mean })
}

/// PR curve of one class over many images at one IoU threshold.
pub fn dataset_pr_curve(scenes: &[Scene], class: &str, iou_threshold: f64) -> Result<PrCurve> {
    let threshold = check_threshold(iou_threshold)?;
    let mut matches = Vec::new();
    let mut num_gt = 0usize;
    for scene in scenes {
        num_gt += match_scene(scene, class, threshold, &mut matches)?;
    }
    if num_gt == 0 {
        let value = if matches.is_empty() { 1.0 } else { 0.0 };
        return Ok(PrCurve {
            points: Vec::new(),
            interpolated: vec![value; RECALL_POINTS],
        });
    }
    matches.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite scores"));
    Ok(PrCurve::from_matches(&matches, num_gt))
}

/// mAP50-95 of one scene; multi-class input is averaged per class.
pub fn map_50_95(dets: &[Detection], gts: &[GroundTruth]) -> Result<f64> {
    Ok(map_50_95_per_class(dets, gts)?.mean)
}

/// Per-class mAP50-95 of one scene.
pub fn map_50_95_per_class(dets: &[Detection], gts: &[GroundTruth]) -> Result<ApTable> {
    dataset_map_50_95(&[Scene {
        detections: dets.to_vec(),
        ground_truths: gts.to_vec(),
    }])
}
