//! Evaluation mathematics: per-class IoU and mIoU, Dice loss, COCO-style
//! average precision and meta-parameter breakdowns.

mod ap;

pub use ap::{
    average_precision, dataset_map_50_95, dataset_pr_curve, geometry_iou, map_50_95,
    map_50_95_per_class, pr_curve, ApTable, DetGeometry, Detection, GroundTruth, PrCurve, Scene,
    COCO_THRESHOLDS,
};

use serde::Serialize;

use crate::annot::{Lighting, MetaParams, Moisture, SemanticClass, Stage};
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, SemanticMask};

/// Pixel counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

/// Per-class TP/FP/FN pixel counts over an evaluated scope.
///
/// Every evaluated pixel has exactly one ground-truth class, so
/// `sum(TP) + sum(FN)` equals the evaluated pixel count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionTotals {
    counts: [ClassCounts; SemanticClass::COUNT],
}

impl ConfusionTotals {
    pub fn class(&self, class: SemanticClass) -> ClassCounts {
        self.counts[class.index()]
    }

    pub fn per_class(&self) -> &[ClassCounts; SemanticClass::COUNT] {
        &self.counts
    }

    /// Hand-set counts, mostly for tests and fixtures.
    pub fn from_counts(counts: [ClassCounts; SemanticClass::COUNT]) -> ConfusionTotals {
        ConfusionTotals { counts }
    }

    pub fn merge(&mut self, other: &ConfusionTotals) {
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            mine.true_pos += theirs.true_pos;
            mine.false_pos += theirs.false_pos;
            mine.false_neg += theirs.false_neg;
        }
    }

    pub fn evaluated_pixels(&self) -> u64 {
        self.counts.iter().map(|c| c.true_pos + c.false_neg).sum()
    }
}

/// Tally per-class TP/FP/FN between a predicted and a ground-truth mask.
///
/// Pixels outside `roi` (when given) are ignored entirely.
pub fn confusion(
    pred: &SemanticMask,
    gt: &SemanticMask,
    roi: Option<&BinaryMask>,
) -> Result<ConfusionTotals> {
    let dims = (pred.width(), pred.height());
    if dims != (gt.width(), gt.height()) {
        return Err(Error::Metrics(format!(
            "mask dimension mismatch: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if let Some(roi) = roi {
        if dims != (roi.width(), roi.height()) {
            return Err(Error::Metrics("roi dimension mismatch".into()));
        }
    }
    let mut totals = ConfusionTotals::default();
    for (index, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if let Some(roi) = roi {
            if roi.data()[index] == 0 {
                continue;
            }
        }
        if p == g {
            totals.counts[p as usize].true_pos += 1;
        } else {
            totals.counts[p as usize].false_pos += 1;
            totals.counts[g as usize].false_neg += 1;
        }
    }
    Ok(totals)
}

/// Per-class IoUs and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiouResult {
    /// `None` for classes absent from both prediction and ground truth in
    /// the evaluated scope; those are excluded from the mean.
    pub per_class: [Option<f64>; SemanticClass::COUNT],
    pub mean: f64,
}

/// IoU per class (`TP / (TP + FP + FN)`) and the mean over evaluable
/// classes.
pub fn miou(totals: &ConfusionTotals) -> Result<MiouResult> {
    let mut per_class = [None; SemanticClass::COUNT];
    let mut sum = 0.0;
    let mut evaluable = 0usize;
    for (index, counts) in totals.per_class().iter().enumerate() {
        let denom = counts.true_pos + counts.false_pos + counts.false_neg;
        if denom == 0 {
            continue;
        }
        let iou = counts.true_pos as f64 / denom as f64;
        per_class[index] = Some(iou);
        sum += iou;
        evaluable += 1;
    }
    if evaluable == 0 {
        return Err(Error::Metrics("no evaluable classes".into()));
    }
    Ok(MiouResult {
        per_class,
        mean: sum / evaluable as f64,
    })
}

/// How to aggregate mIoU over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiouMode {
    /// Micro aggregation: sum TP/FP/FN over all images, then compute IoUs.
    /// Robust to images missing classes; the default for result tables.
    Aggregate,
    /// Per-sample mIoU averaged over images; used for per-condition
    /// breakdowns.
    PerSample,
}

/// Aggregate per-image confusion totals into one mIoU result.
pub fn dataset_miou(per_image: &[ConfusionTotals], mode: MiouMode) -> Result<MiouResult> {
    match mode {
        MiouMode::Aggregate => {
            let mut totals = ConfusionTotals::default();
            for image in per_image {
                totals.merge(image);
            }
            miou(&totals)
        }
        MiouMode::PerSample => {
            let mut class_sums = [(0.0f64, 0usize); SemanticClass::COUNT];
            let mut mean_sum = 0.0;
            let mut n = 0usize;
            for image in per_image {
                let result = miou(image)?;
                mean_sum += result.mean;
                n += 1;
                for (slot, value) in class_sums.iter_mut().zip(result.per_class) {
                    if let Some(iou) = value {
                        slot.0 += iou;
                        slot.1 += 1;
                    }
                }
            }
            if n == 0 {
                return Err(Error::Metrics("no evaluable classes".into()));
            }
            let mut per_class = [None; SemanticClass::COUNT];
            for (slot, (sum, count)) in per_class.iter_mut().zip(class_sums) {
                if count > 0 {
                    *slot = Some(sum / count as f64);
                }
            }
            Ok(MiouResult {
                per_class,
                mean: mean_sum / n as f64,
            })
        }
    }
}

/// Per-class probability planes over one raster, class-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<ProbabilityMap> {
        let expected = width as usize * height as usize * SemanticClass::COUNT;
        if data.len() != expected {
            return Err(Error::Metrics(format!(
                "probability buffer length {} does not match {} classes over {}x{}",
                data.len(),
                SemanticClass::COUNT,
                width,
                height
            )));
        }
        Ok(ProbabilityMap { width, height, data })
    }

    pub fn one_hot(mask: &SemanticMask) -> ProbabilityMap {
        let pixels = mask.width() as usize * mask.height() as usize;
        let mut data = vec![0.0; pixels * SemanticClass::COUNT];
        for (index, &class) in mask.data().iter().enumerate() {
            data[class as usize * pixels + index] = 1.0;
        }
        ProbabilityMap {
            width: mask.width(),
            height: mask.height(),
            data,
        }
    }

    pub fn uniform(width: u32, height: u32) -> ProbabilityMap {
        let pixels = width as usize * height as usize;
        ProbabilityMap {
            width,
            height,
            data: vec![1.0 / SemanticClass::COUNT as f64; pixels * SemanticClass::COUNT],
        }
    }

    fn plane(&self, class: usize) -> &[f64] {
        let pixels = self.width as usize * self.height as usize;
        &self.data[class * pixels..(class + 1) * pixels]
    }
}

/// Smoothed Dice loss of a soft prediction against a ground-truth mask,
/// averaged over the classes present in the ground truth.
pub fn dice_loss(pred: &ProbabilityMap, gt: &SemanticMask, epsilon: f64) -> Result<f64> {
    if (pred.width, pred.height) != (gt.width(), gt.height()) {
        return Err(Error::Metrics("probability map and mask dimensions differ".into()));
    }
    if epsilon <= 0.0 {
        return Err(Error::Metrics("epsilon must be positive".into()));
    }
    let pixels = pred.width as usize * pred.height as usize;
    for index in 0..pixels {
        let mut sum = 0.0;
        for class in 0..SemanticClass::COUNT {
            let p = pred.plane(class)[index];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Metrics(format!("probability {p} outside [0, 1]")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Metrics(format!(
                "pixel probabilities sum to {sum}, expected 1"
            )));
        }
    }

    let counts = gt.class_counts();
    let mut loss_sum = 0.0;
    let mut present = 0usize;
    for (class, &gt_count) in counts.iter().enumerate() {
        if gt_count == 0 {
            continue;
        }
        let plane = pred.plane(class);
        let mut intersection = 0.0;
        let mut pred_sum = 0.0;
        for (index, &g) in gt.data().iter().enumerate() {
            let p = plane[index];
            pred_sum += p;
            if g as usize == class {
                intersection += p;
            }
        }
        let gt_sum = gt_count as f64;
        loss_sum += 1.0 - (2.0 * intersection + epsilon) / (pred_sum + gt_sum + epsilon);
        present += 1;
    }
    if present == 0 {
        return Err(Error::Metrics("ground truth contains no pixels".into()));
    }
    Ok(loss_sum / present as f64)
}

/// Mean per-image mIoU for every value of every meta category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaBreakdown {
    pub lighting: Vec<(Lighting, Option<f64>)>,
    pub moisture: Vec<(Moisture, Option<f64>)>,
    pub stage: Vec<(Stage, Option<f64>)>,
    pub overall: Option<f64>,
}

/// Break per-image mIoUs down by lighting, moisture and stage.
pub fn meta_breakdown(entries: &[(String, f64, MetaParams)]) -> MetaBreakdown {
    fn mean_where<T: Copy + PartialEq>(
        entries: &[(String, f64, MetaParams)],
        values: &[T],
        select: impl Fn(&MetaParams) -> T,
    ) -> Vec<(T, Option<f64>)> {
        values
            .iter()
            .map(|value| {
                let matching: Vec<f64> = entries
                    .iter()
                    .filter(|(_, _, meta)| select(meta) == *value)
                    .map(|(_, miou, _)| *miou)
                    .collect();
                let mean = if matching.is_empty() {
                    None
                } else {
                    Some(matching.iter().sum::<f64>() / matching.len() as f64)
                };
                (*value, mean)
            })
            .collect()
    }

    let overall = if entries.is_empty() {
        None
    } else {
        Some(entries.iter().map(|(_, m, _)| m).sum::<f64>() / entries.len() as f64)
    };
    MetaBreakdown {
        lighting: mean_where(entries, &Lighting::ALL, |m| m.lighting),
        moisture: mean_where(entries, &Moisture::ALL, |m| m.moisture),
        stage: mean_where(entries, &Stage::ALL, |m| m.stage),
        overall,
    }
}
