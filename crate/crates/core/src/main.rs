use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nsa_forge::config::ClassConfig;
use nsa_forge::labeler::DEFAULT_FILTER_WINDOW;
use nsa_forge::metrics::{Connectivity, EvalOptions, DEFAULT_FPR_LIMIT};
use nsa_forge::pipeline::io::{load_image, save_image, save_label};
use nsa_forge::pipeline::synth::{blend_pair, label_kind_name, prepare_pair, SAMPLE_ATTEMPTS};
use nsa_forge::pipeline::{apply_ablations, demo, evaluate, synthesize, Ablation, DatasetSpec, TaskMode};
use nsa_forge::poisson::CloneOptions;
use nsa_forge::rng::RngStream;
use nsa_forge::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PLACEMENT: u8 = 3;

#[derive(Parser)]
#[command(name = "nsa-forge", version, about = "Synthetic anomaly generation and anomaly-map scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of blended images, labels and a manifest.
    Synthesize(SynthArgs),
    /// Blend a single source/destination pair.
    Blend(BlendArgs),
    /// Score prediction maps against ground-truth masks.
    Eval(EvalArgs),
    /// Configuration file utilities.
    Config {
        #[command(subcommand)]
        command: ConfigCommand,
    },
    /// Composite of CutPaste, FPI, PII and NSA on one image pair.
    Demo(DemoArgs),
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Parse and validate class configuration files.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "nsa-logistic", value_parser = parse_mode)]
    mode: TaskMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repeatable; A: no constraints, B: one patch, C: CutPaste-style rects, D: ellipse shapes.
    #[arg(long, value_parser = parse_ablation, value_delimiter = ',')]
    ablation: Vec<Ablation>,
    #[arg(long, default_value_t = DEFAULT_FILTER_WINDOW)]
    filter_window: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Directory of normal PNG images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, env = "NSA_FORGE_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct BlendArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    destination: PathBuf,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of 8- or 16-bit gray prediction PNGs.
    #[arg(long)]
    predictions: PathBuf,
    /// Directory of mask PNGs with matching file stems; nonzero is anomalous.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FPR_LIMIT)]
    fpr_limit: f64,
    #[arg(long)]
    resample_256: bool,
    #[arg(long, default_value = "8", value_parser = parse_connectivity)]
    connectivity: Connectivity,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    destination: PathBuf,
    /// Class configuration; defaults to unconstrained sampling.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Composite PNG path.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_mode(s: &str) -> std::result::Result<TaskMode, String> {
    TaskMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
        let names: Vec<_> = TaskMode::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    match s.to_ascii_uppercase().as_str() {
        "A" => Ok(Ablation::A),
        "B" => Ok(Ablation::B),
        "C" => Ok(Ablation::C),
        "D" => Ok(Ablation::D),
        _ => Err("expected A, B, C or D".into()),
    }
}

fn parse_connectivity(s: &str) -> std::result::Result<Connectivity, String> {
    match s {
        "4" => Ok(Connectivity::Four),
        "8" => Ok(Connectivity::Eight),
        _ => Err("expected 4 or 8".into()),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::PlacementFailure { .. } | Error::NotConverged { .. } => EXIT_PLACEMENT,
        _ => EXIT_DATA,
    }
}

fn run_synthesize(a: SynthArgs) -> Result<u8> {
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Error::InvalidArgument("--workers must be at least 1".into()));
    }
    let spec = DatasetSpec {
        count: a.count,
        base_seed: a.task.seed,
        mode: a.task.mode,
        ablations: a.task.ablation,
        workers,
        filter_window: a.task.filter_window,
        ..DatasetSpec::new(a.input, ClassConfig::load(&a.task.config)?, a.output)
    };
    let summary = synthesize(&spec)?;
    eprintln!(
        "wrote {} samples ({} skipped); manifest {}",
        summary.written,
        summary.skipped,
        summary.manifest.display()
    );
    Ok(if summary.written == 0 { EXIT_PLACEMENT } else { 0 })
}

fn run_blend(a: BlendArgs) -> Result<u8> {
    let cfg = apply_ablations(&ClassConfig::load(&a.task.config)?, &a.task.ablation);
    cfg.validate()?;
    let src = load_image(&a.source)?;
    let dst = load_image(&a.destination)?;
    let root = RngStream::new(a.task.seed);
    let mut last = None;
    for attempt in 0..SAMPLE_ATTEMPTS {
        let mut rng = root.derive(attempt as u64);
        let (s, d) = prepare_pair(&src, &dst, cfg.preprocess.as_ref(), &mut rng)?;
        let s = if a.task.mode == TaskMode::Cutpaste { d.clone() } else { s };
        match blend_pair(&s, &d, &cfg, a.task.mode, a.task.filter_window, CloneOptions::default(), &mut rng) {
            Ok(b) => {
                std::fs::create_dir_all(&a.output)?;
                save_image(&a.output.join("blended.png"), &b.image)?;
                let mut labels = serde_json::Map::new();
                for label in &b.labels {
                    let name = format!("label_{}.png", label_kind_name(label.kind));
                    save_label(&a.output.join(&name), label)?;
                    labels.insert(label_kind_name(label.kind).into(), json!(name));
                }
                let (w, h) = (b.image.width(), b.image.height());
                let placements: Vec<_> = b
                    .placements
                    .iter()
                    .map(|p| {
                        json!({
                            "src_rect": p.src_rect,
                            "dst_rect": p.dst_rect,
                            "dst_pixels": p.dst_pixels(w, h),
                            "scale": p.scale,
                            "rejection_counts": p.rejection_counts,
                        })
                    })
                    .collect();
                let info = json!({
                    "mode": a.task.mode.name(),
                    "seed": a.task.seed,
                    "attempt": attempt,
                    "labels": labels,
                    "alphas": b.alphas,
                    "placements": placements,
                });
                std::fs::write(a.output.join("blend.json"), serde_json::to_string_pretty(&info)? + "\n")?;
                return Ok(0);
            }
            Err(e @ (Error::PlacementFailure { .. } | Error::NotConverged { .. })) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn run_eval(a: EvalArgs) -> Result<u8> {
    let opts = EvalOptions { fpr_limit: a.fpr_limit, connectivity: a.connectivity, resample_256: a.resample_256 };
    let report = evaluate(&a.predictions, &a.truth, opts)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match a.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn run_config_check(paths: &[PathBuf]) -> u8 {
    let mut code = 0;
    for p in paths {
        match ClassConfig::load(p) {
            Ok(cfg) => println!("ok {} ({})", p.display(), cfg.name),
            Err(e) => {
                eprintln!("{e}");
                code = EXIT_DATA;
            }
        }
    }
    code
}

fn run_demo(a: DemoArgs) -> Result<u8> {
    let cfg = match &a.config {
        Some(p) => ClassConfig::load(p)?,
        None => ClassConfig::default(),
    };
    let out = demo(&load_image(&a.source)?, &load_image(&a.destination)?, &cfg, a.seed)?;
    save_image(&a.output, &out.composite)?;
    let panels: Vec<_> = out
        .panels
        .iter()
        .map(|p| json!({"mode": p.mode.name(), "boundary_gradient": p.edge, "exterior_identical": p.exterior_identical}))
        .collect();
    println!("{}", serde_json::to_string_pretty(&json!({ "composite": a.output, "panels": panels }))?);
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synthesize(a) => run_synthesize(a),
        Command::Blend(a) => run_blend(a),
        Command::Eval(a) => run_eval(a),
        Command::Config { command: ConfigCommand::Check { paths } } => Ok(run_config_check(&paths)),
        Command::Demo(a) => run_demo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

