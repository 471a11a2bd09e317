//! `beetscan inspect`: run the two-stage pipeline over a dataset and
//! write one report JSON plus one fused-mask PNG per image, named by
//! image id, plus an aggregate summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use beetscan_core::annot::AnnotatedImage;
use beetscan_core::backends::{AdapterConfig, ExternalBackend, ImageHandle, OracleBackend};
use beetscan_core::pipeline::{inspect_image, InspectConfig, InspectionReport, MassModel};
use beetscan_core::raster::RgbRaster;
use beetscan_core::{InspectionBackend, SemanticClass};

use crate::config::ToolConfig;

pub struct Request {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub oracle: bool,
    pub images: Option<PathBuf>,
    pub mass_model: Option<PathBuf>,
    pub config: ToolConfig,
}

pub fn run(request: Request) -> Result<()> {
    if request.oracle && request.config.adapter.is_some() {
        bail!("--oracle and --adapter are mutually exclusive");
    }
    if !request.oracle && request.config.adapter.is_none() {
        bail!("choose a backend: --oracle or --adapter \"<command>\"");
    }

    let images = super::load_dataset(&request.dataset)?;
    let image_dir = request
        .images
        .clone()
        .or_else(|| request.dataset.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));

    let mass_model: Option<MassModel> = match &request.mass_model {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("invalid mass model {}", path.display()))?)
        }
    };

    let inspect_config = InspectConfig {
        target: request.config.tier.size(),
        margin_frac: request.config.margin_frac,
        marker_dims: request.config.marker_dims(),
        scale_residual_bound: request.config.scale_residual_bound,
        mass_model,
    };

    std::fs::create_dir_all(&request.out)?;
    let scratch_root = request.out.join("scratch");
    let adapter_command: Option<Vec<String>> = request
        .config
        .adapter
        .as_ref()
        .map(|command| command.split_whitespace().map(str::to_string).collect());

    let workers = request.config.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot build worker pool")?;

    let oracle_source = images.clone();
    // each backend instance gets its own scratch directory, so two adapter
    // processes never clobber each other's patch files
    let backend_counter = std::sync::atomic::AtomicUsize::new(0);
    let make_backend = move || -> Result<Box<dyn InspectionBackend + Send>> {
        match &adapter_command {
            None => Ok(Box::new(OracleBackend::new(oracle_source.iter().cloned()))),
            Some(command) => {
                let id = backend_counter.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let scratch = scratch_root.join(format!("worker_{id}"));
                let backend = ExternalBackend::spawn(AdapterConfig::new(command.clone(), scratch))
                    .context("cannot spawn adapter")?;
                Ok(Box::new(backend))
            }
        }
    };

    let oracle = request.oracle;
    let out = request.out.clone();
    let mut reports: Vec<InspectionReport> = pool.install(|| {
        images
            .par_iter()
            .map_init(
                || None,
                |slot, image| -> Result<InspectionReport> {
                    if slot.is_none() {
                        *slot = Some(make_backend()?);
                    }
                    let backend = slot.as_mut().expect("just created");
                    process_image(image, &image_dir, &out, oracle, backend.as_mut(), &inspect_config)
                },
            )
            .collect::<Result<Vec<_>>>()
    })?;
    reports.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let summary = summarize(&reports);
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "inspected {} images, {} beets, {} with scale; reports in {}",
        reports.len(),
        reports.iter().map(|r| r.beets.len()).sum::<usize>(),
        reports.iter().filter(|r| r.scale.is_some()).count(),
        out.display()
    );
    Ok(())
}

fn process_image(
    image: &AnnotatedImage,
    image_dir: &Path,
    out: &Path,
    oracle: bool,
    backend: &mut dyn InspectionBackend,
    config: &InspectConfig,
) -> Result<InspectionReport> {
    let path = {
        let candidate = Path::new(&image.path);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            image_dir.join(candidate)
        }
    };
    let raster = if path.exists() {
        RgbRaster::read_png(&path).with_context(|| format!("cannot read {}", path.display()))?
    } else if oracle {
        // the oracle never looks at pixels; a neutral canvas lets
        // annotation-only fixtures run end to end
        eprintln!(
            "note: {} missing, using a neutral canvas for `{}`",
            path.display(),
            image.image_id
        );
        RgbRaster::filled(image.width, image.height, [128, 128, 128])
    } else {
        bail!("image file {} not found", path.display());
    };
    if (raster.width(), raster.height()) != (image.width, image.height) {
        bail!(
            "image `{}` is {}x{} on disk but annotated as {}x{}",
            image.image_id,
            raster.width(),
            raster.height(),
            image.width,
            image.height
        );
    }

    let handle = ImageHandle {
        image_id: image.image_id.clone(),
        path,
        width: image.width,
        height: image.height,
    };
    let outcome = inspect_image(&handle, &raster, backend, config)
        .with_context(|| format!("inspection of `{}` failed", image.image_id))?;

    let stem = sanitize(&image.image_id);
    std::fs::write(out.join(format!("{stem}.json")), outcome.report.to_json())?;
    outcome
        .fused
        .write_png(&out.join(format!("{stem}_mask.png")))
        .with_context(|| format!("cannot write fused mask for `{}`", image.image_id))?;
    Ok(outcome.report)
}

fn sanitize(image_id: &str) -> String {
    image_id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn summarize(reports: &[InspectionReport]) -> serde_json::Value {
    let mut areas_px: BTreeMap<&str, u64> = BTreeMap::new();
    let mut areas_mm2: BTreeMap<&str, f64> = BTreeMap::new();
    let mut beets = 0usize;
    let mut mass_total = 0.0;
    let mut mass_count = 0usize;
    for report in reports {
        for beet in &report.beets {
            beets += 1;
            for class in SemanticClass::ALL {
                *areas_px.entry(class.name()).or_default() += beet.area_px(class);
            }
            if let Some(mm2) = &beet.areas_mm2 {
                for (class, area) in mm2 {
                    *areas_mm2.entry(match SemanticClass::from_name(class) {
                        Some(c) => c.name(),
                        None => continue,
                    }).or_default() += area;
                }
            }
            if let Some(mass) = beet.mass_g {
                mass_total += mass;
                mass_count += 1;
            }
        }
    }
    serde_json::json!({
        "images": reports.len(),
        "beets": beets,
        "images_with_scale": reports.iter().filter(|r| r.scale.is_some()).count(),
        "areas_px": areas_px,
        "areas_mm2": if areas_mm2.is_empty() { serde_json::Value::Null } else { serde_json::json!(areas_mm2) },
        "beets_with_mass": mass_count,
        "total_mass_g": if mass_count > 0 { serde_json::json!(mass_total) } else { serde_json::Value::Null },
    })
}
