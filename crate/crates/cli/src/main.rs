//! beetscan: dataset handling, evaluation and two-stage inspection of
//! post-harvest sugar beets from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beetscan_core::pipeline::PatchTier;
use config::ToolConfig;

#[derive(Parser)]
#[command(name = "beetscan", version, about = "Sugar-beet inspection toolkit")]
struct Cli {
    /// Configuration file (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-stage dataset statistics and label pixel distributions.
    Stats(StatsArgs),
    /// Convert fine-grained annotations into the one-class instance dataset.
    Convert(ConvertArgs),
    /// Generate a grouped train/val/test split.
    Split(SplitArgs),
    /// Evaluate predictions against a dataset (mIoU or mAP50-95).
    Evaluate(EvaluateArgs),
    /// Fit the average mass per unit area from calibration samples.
    CalibrateMass(CalibrateArgs),
    /// Run the two-stage inspection pipeline and write per-image reports.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// Annotation dataset JSON.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory for machine-readable outputs (JSON + CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also rasterize all masks and emit per-class pixel distributions.
    #[arg(long)]
    pixels: bool,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output annotation JSON (one Beet region per instance).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output split JSON ({"train": [...], "val": [...], "test": [...]}).
    #[arg(long)]
    out: PathBuf,
    /// Train,val,test fractions; must sum to 1.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// seg (semantic masks), det (boxes or instance masks) or obb
    /// (oriented marker boxes).
    #[arg(long)]
    task: String,
    #[arg(long)]
    dataset: PathBuf,
    /// Predictions as JSON lines; see the README for the line formats.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// seg only: average per-sample mIoUs instead of micro aggregation.
    #[arg(long)]
    per_sample: bool,
    /// seg only: also break per-sample mIoU down by meta parameters.
    #[arg(long)]
    breakdown: bool,
    /// det/obb only: write per-class PR curves at IoU 0.50 as CSV.
    #[arg(long)]
    pr_out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// JSON file: {"samples": [{"area_mm2": ..., "mass_g": ...}, ...]}.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory: one report JSON and fused mask PNG per image
    /// plus summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Answer from ground-truth annotations instead of a model.
    #[arg(long)]
    oracle: bool,
    /// Adapter command line (whitespace-split) implementing the JSON-lines
    /// protocol.
    #[arg(long)]
    adapter: Option<String>,
    /// Directory the image paths in the dataset are relative to; defaults
    /// to the dataset file's directory.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Stage-2 patch size: small (512x288), medium (768x448) or large
    /// (1056x576).
    #[arg(long)]
    tier: Option<String>,
    #[arg(long)]
    margin: Option<f64>,
    /// Mass model JSON produced by calibrate-mass.
    #[arg(long)]
    mass_model: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> anyhow::Result<()> {
        let config = ToolConfig::load(cli.config.as_deref())?;
        match cli.command {
            Command::Stats(args) => commands::stats::run(&args.dataset, args.out.as_deref(), args.pixels),
            Command::Convert(args) => commands::convert::run(&args.dataset, &args.out),
            Command::Split(args) => {
                let ratios = match args.ratios {
                    None => config.split_ratios,
                    Some(r) if r.len() == 3 => [r[0], r[1], r[2]],
                    Some(r) => anyhow::bail!("--ratios needs 3 values, got {}", r.len()),
                };
                commands::split::run(&args.dataset, &args.out, ratios, args.seed.unwrap_or(config.split_seed))
            }
            Command::Evaluate(args) => commands::evaluate::run(commands::evaluate::Request {
                task: args.task,
                dataset: args.dataset,
                pred: args.pred,
                out: args.out,
                per_sample: args.per_sample,
                breakdown: args.breakdown,
                pr_out: args.pr_out,
            }),
            Command::CalibrateMass(args) => commands::calibrate::run(&args.samples, &args.out),
            Command::Inspect(args) => {
                let mut config = config;
                if let Some(tier) = args.tier.as_deref() {
                    config.tier = PatchTier::from_name(tier)
                        .ok_or_else(|| anyhow::anyhow!("unknown tier `{tier}`"))?;
                }
                if let Some(margin) = args.margin {
                    config.margin_frac = margin;
                }
                if let Some(workers) = args.workers {
                    config.workers = workers;
                }
                if args.adapter.is_some() {
                    config.adapter = args.adapter.clone();
                }
                commands::inspect::run(commands::inspect::Request {
                    dataset: args.dataset,
                    out: args.out,
                    oracle: args.oracle,
                    images: args.images,
                    mass_model: args.mass_model,
                    config,
                })
            }
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
