//! `beetscan evaluate`: mIoU tables for semantic segmentation, mAP50-95
//! for detection (boxes or instance masks) and oriented marker boxes.
//!
//! Predictions are JSON lines:
//!   seg: {"image_id": "...", "mask_path": "masks/i01.png"}
//!   det: {"image_id": "...", "class": "Beet", "score": 0.97,
//!         "box": [x0, y0, x1, y1]}  or  "mask_path": "..."
//!   obb: {"image_id": "...", "class": "Ruler", "score": 0.9,
//!         "obb": {"cx": ..., "cy": ..., "w": ..., "h": ..., "angle": ...}}
//!
//! Mask paths resolve relative to the prediction file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use beetscan_core::annot::{AnnotatedImage, MetaParams};
use beetscan_core::geometry::{obb_from_corners, rasterize, rasterize_polygon, BinaryMask, OrientedBox, SemanticMask};
use beetscan_core::metrics::{
    confusion, dataset_map_50_95, dataset_miou, dataset_pr_curve, meta_breakdown, miou,
    ConfusionTotals, DetGeometry, Detection, GroundTruth, MetaBreakdown, MiouMode, MiouResult,
    Scene,
};
use beetscan_core::synthesis::synthesize_instances;
use beetscan_core::SemanticClass;

use super::{load_dataset, write_csv};

pub struct Request {
    pub task: String,
    pub dataset: PathBuf,
    pub pred: PathBuf,
    pub out: Option<PathBuf>,
    pub per_sample: bool,
    pub breakdown: bool,
    pub pr_out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct PredLine {
    image_id: String,
    #[serde(default)]
    class: Option<String>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default, rename = "box")]
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    obb: Option<WireObb>,
    #[serde(default)]
    mask_path: Option<String>,
}

#[derive(Deserialize)]
struct WireObb {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    angle: f64,
}

pub fn run(request: Request) -> Result<()> {
    let images = load_dataset(&request.dataset)?;
    let lines = read_lines(&request.pred)?;
    let by_id: BTreeMap<&str, &AnnotatedImage> =
        images.iter().map(|image| (image.image_id.as_str(), image)).collect();
    for line in &lines {
        if !by_id.contains_key(line.image_id.as_str()) {
            bail!("prediction references unknown image id `{}`", line.image_id);
        }
    }
    match request.task.as_str() {
        "seg" => run_seg(&request, &images, &lines),
        "det" => run_detection(&request, &images, &lines, Task::Instances),
        "obb" => run_detection(&request, &images, &lines, Task::Markers),
        other => bail!("unknown task `{other}` (expected seg, det or obb)"),
    }
}

fn read_lines(path: &Path) -> Result<Vec<PredLine>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(number, line)| {
            serde_json::from_str(line)
                .with_context(|| format!("{}:{}: invalid prediction line", path.display(), number + 1))
        })
        .collect()
}

fn resolve(pred_file: &Path, mask_path: &str) -> PathBuf {
    let candidate = Path::new(mask_path);
    if candidate.is_absolute() {
        candidate.to_path_buf()
    } else {
        pred_file.parent().unwrap_or(Path::new(".")).join(candidate)
    }
}

fn run_seg(request: &Request, images: &[AnnotatedImage], lines: &[PredLine]) -> Result<()> {
    let by_id: BTreeMap<&str, &AnnotatedImage> =
        images.iter().map(|image| (image.image_id.as_str(), image)).collect();
    let mut seen = std::collections::BTreeSet::new();
    let mut per_image: Vec<ConfusionTotals> = Vec::new();
    let mut per_sample_entries: Vec<(String, f64, MetaParams)> = Vec::new();

    for line in lines {
        if !seen.insert(line.image_id.clone()) {
            bail!("duplicate seg prediction for image `{}`", line.image_id);
        }
        let mask_path = line
            .mask_path
            .as_deref()
            .with_context(|| format!("seg line for `{}` is missing mask_path", line.image_id))?;
        let pred = SemanticMask::read_png(&resolve(&request.pred, mask_path))
            .with_context(|| format!("cannot read mask for `{}`", line.image_id))?;
        let image = by_id[line.image_id.as_str()];
        let gt = rasterize(&image.regions, image.width, image.height);
        let totals = confusion(&pred, &gt, None)
            .with_context(|| format!("image `{}`", line.image_id))?;
        if request.breakdown || request.per_sample {
            let sample = miou(&totals).with_context(|| format!("image `{}`", line.image_id))?;
            per_sample_entries.push((line.image_id.clone(), sample.mean, image.meta.clone()));
        }
        per_image.push(totals);
    }
    if per_image.is_empty() {
        bail!("no predictions to evaluate");
    }

    let mode = if request.per_sample { MiouMode::PerSample } else { MiouMode::Aggregate };
    let result = dataset_miou(&per_image, mode).context("mIoU failed")?;
    print_iou_table(&result, mode, per_image.len());

    let breakdown = if request.breakdown {
        let table = meta_breakdown(&per_sample_entries);
        print_breakdown(&table);
        Some(table)
    } else {
        None
    };

    if let Some(out) = &request.out {
        std::fs::create_dir_all(out)?;
        let doc = serde_json::json!({
            "task": "seg",
            "mode": if request.per_sample { "per_sample" } else { "aggregate" },
            "images": per_image.len(),
            "result": result,
            "breakdown": breakdown,
        });
        std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&doc)?)?;
        let rows: Vec<Vec<String>> = SemanticClass::ALL
            .iter()
            .map(|class| {
                vec![
                    class.name().to_string(),
                    match result.per_class[class.index()] {
                        Some(iou) => format!("{:.6}", iou),
                        None => String::new(),
                    },
                ]
            })
            .chain(std::iter::once(vec!["Mean".into(), format!("{:.6}", result.mean)]))
            .collect();
        write_csv(&out.join("iou.csv"), &["class", "iou"], &rows)?;
        if let Some(table) = &breakdown {
            write_breakdown_csv(&out.join("meta_breakdown.csv"), table)?;
        }
    }
    Ok(())
}

fn print_iou_table(result: &MiouResult, mode: MiouMode, images: usize) {
    let mode_name = match mode {
        MiouMode::Aggregate => "aggregate",
        MiouMode::PerSample => "per-sample",
    };
    println!("IoU (%) over {images} images, {mode_name}:");
    let header: Vec<String> = SemanticClass::ALL
        .iter()
        .map(|c| format!("{:>6}", c.name()))
        .chain(std::iter::once(format!("{:>7}", "Mean")))
        .collect();
    println!("{}", header.join(" "));
    let row: Vec<String> = result
        .per_class
        .iter()
        .map(|iou| match iou {
            Some(iou) => format!("{:>6.1}", iou * 100.0),
            None => format!("{:>6}", "-"),
        })
        .chain(std::iter::once(format!("{:>7.1}", result.mean * 100.0)))
        .collect();
    println!("{}", row.join(" "));
}

fn print_breakdown(table: &MetaBreakdown) {
    println!("\nmean per-sample mIoU (%) by meta parameter:");
    let cell = |value: &Option<f64>| match value {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "-".to_string(),
    };
    for (lighting, mean) in &table.lighting {
        println!("  Lighting {:<11} {}", lighting.name(), cell(mean));
    }
    for (moisture, mean) in &table.moisture {
        println!("  Moisture {:<11} {}", moisture.name(), cell(mean));
    }
    for (stage, mean) in &table.stage {
        println!("  Stage    {:<11} {}", stage.name(), cell(mean));
    }
    println!("  Overall              {}", cell(&table.overall));
}

fn write_breakdown_csv(path: &Path, table: &MetaBreakdown) -> Result<()> {
    let cell = |value: &Option<f64>| value.map(|v| format!("{v:.6}")).unwrap_or_default();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (lighting, mean) in &table.lighting {
        rows.push(vec!["lighting".into(), lighting.name().into(), cell(mean)]);
    }
    for (moisture, mean) in &table.moisture {
        rows.push(vec!["moisture".into(), moisture.name().into(), cell(mean)]);
    }
    for (stage, mean) in &table.stage {
        rows.push(vec!["stage".into(), stage.name().into(), cell(mean)]);
    }
    rows.push(vec!["overall".into(), String::new(), cell(&table.overall)]);
    write_csv(path, &["category", "value", "mean_miou"], &rows)
}

enum Task {
    Instances,
    Markers,
}

fn run_detection(
    request: &Request,
    images: &[AnnotatedImage],
    lines: &[PredLine],
    task: Task,
) -> Result<()> {
    // group predictions per image
    let mut per_image: BTreeMap<&str, Vec<&PredLine>> = BTreeMap::new();
    for line in lines {
        per_image.entry(line.image_id.as_str()).or_default().push(line);
    }

    let mut scenes = Vec::with_capacity(images.len());
    for image in images {
        let ground_truths = match task {
            Task::Instances => instance_ground_truths(image, lines)?,
            Task::Markers => marker_ground_truths(image)?,
        };
        let mut detections = Vec::new();
        for line in per_image.get(image.image_id.as_str()).into_iter().flatten() {
            detections.push(parse_detection(request, line, &task)?);
        }
        scenes.push(Scene {
            detections,
            ground_truths,
        });
    }

    let table = dataset_map_50_95(&scenes).context("mAP failed")?;
    println!("mAP50-95 (%) over {} images:", images.len());
    for (class, ap) in &table.per_class {
        println!("  {:<8} {:>6.1}", class, ap * 100.0);
    }
    println!("  {:<8} {:>6.1}", "Mean", table.mean * 100.0);

    if let Some(out) = &request.out {
        std::fs::create_dir_all(out)?;
        let doc = serde_json::json!({
            "task": match task { Task::Instances => "det", Task::Markers => "obb" },
            "images": images.len(),
            "result": table,
        });
        std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&doc)?)?;
        let rows: Vec<Vec<String>> = table
            .per_class
            .iter()
            .map(|(class, ap)| vec![class.clone(), format!("{ap:.6}")])
            .chain(std::iter::once(vec!["Mean".into(), format!("{:.6}", table.mean)]))
            .collect();
        write_csv(&out.join("ap.csv"), &["class", "map_50_95"], &rows)?;
    }

    if let Some(pr_out) = &request.pr_out {
        let mut rows: Vec<Vec<String>> = Vec::new();
        for (class, _) in &table.per_class {
            let curve = dataset_pr_curve(&scenes, class, 0.5)?;
            for (index, precision) in curve.interpolated.iter().enumerate() {
                rows.push(vec![
                    class.clone(),
                    format!("{:.2}", index as f64 / 100.0),
                    format!("{precision:.6}"),
                ]);
            }
        }
        write_csv(pr_out, &["class", "recall", "precision"], &rows)?;
    }
    Ok(())
}

/// Ground truths for the one-class beet detection task; masks when the
/// predictions carry masks, boxes otherwise.
fn instance_ground_truths(image: &AnnotatedImage, lines: &[PredLine]) -> Result<Vec<GroundTruth>> {
    let wants_masks = lines.iter().any(|l| l.mask_path.is_some());
    let wants_boxes = lines.iter().any(|l| l.bbox.is_some());
    if wants_masks && wants_boxes {
        bail!("mixed box and mask predictions; evaluate them separately");
    }
    let (instances, _) = synthesize_instances(image);
    let mut ground_truths = Vec::with_capacity(instances.len());
    for instance in instances {
        let mask = rasterize_polygon(instance.polygon.vertices(), image.width, image.height);
        let Some(bbox) = mask.bbox() else { continue };
        let geometry = if wants_masks {
            DetGeometry::Mask(mask)
        } else {
            DetGeometry::Box(bbox)
        };
        ground_truths.push(GroundTruth {
            geometry,
            class: SemanticClass::Beet.name().to_string(),
        });
    }
    Ok(ground_truths)
}

fn marker_ground_truths(image: &AnnotatedImage) -> Result<Vec<GroundTruth>> {
    image
        .markers
        .iter()
        .map(|marker| {
            let obb = obb_from_corners(marker.corners())
                .with_context(|| format!("marker in image `{}`", image.image_id))?;
            Ok(GroundTruth {
                geometry: DetGeometry::Obb(obb),
                class: marker.class().name().to_string(),
            })
        })
        .collect()
}

fn parse_detection(request: &Request, line: &PredLine, task: &Task) -> Result<Detection> {
    let class = line
        .class
        .clone()
        .with_context(|| format!("prediction for `{}` is missing class", line.image_id))?;
    let score = line
        .score
        .with_context(|| format!("prediction for `{}` is missing score", line.image_id))?;
    let geometry = match task {
        Task::Instances => {
            if let Some([x0, y0, x1, y1]) = line.bbox {
                DetGeometry::Box(
                    beetscan_core::AxisAlignedBox::new(x0, y0, x1, y1)
                        .with_context(|| format!("invalid box for `{}`", line.image_id))?,
                )
            } else if let Some(mask_path) = &line.mask_path {
                DetGeometry::Mask(
                    BinaryMask::read_png(&resolve(&request.pred, mask_path))
                        .with_context(|| format!("cannot read mask for `{}`", line.image_id))?,
                )
            } else {
                bail!("det line for `{}` needs box or mask_path", line.image_id);
            }
        }
        Task::Markers => {
            let obb = line
                .obb
                .as_ref()
                .with_context(|| format!("obb line for `{}` is missing obb", line.image_id))?;
            DetGeometry::Obb(
                OrientedBox::new([obb.cx, obb.cy], obb.w, obb.h, obb.angle)
                    .with_context(|| format!("invalid obb for `{}`", line.image_id))?,
            )
        }
    };
    Ok(Detection {
        geometry,
        class,
        score,
    })
}
