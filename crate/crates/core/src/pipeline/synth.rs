//! Batch generation of self-supervised training samples.
//!
//! Sample `i`, attempt `a` draws everything from `RngStream::new(base_seed).derive(i).derive(a)`,
//! so the output tree depends only on the spec, never on the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ClassConfig, PreprocessSpec, SelectionMode, ShapeMode};
use crate::error::Constraint;
use crate::imaging::ImagePlane;
use crate::labeler::{
    blend_cutpaste, blend_fpi, blend_nsa, blend_pii, label_binary, label_continuous, label_logistic, merge_max,
    sample_alpha, LabelKind, LabelMap, DEFAULT_FILTER_WINDOW,
};
use crate::pipeline::io::{list_pngs, load_image, save_image, save_label};
use crate::pipeline::preprocess;
use crate::poisson::CloneOptions;
use crate::rng::RngStream;
use crate::sampler::{Location, PatchPlacement, PlacementSampler};
use crate::{Error, Result};

/// Attempts per sample before it is recorded as skipped.
pub const SAMPLE_ATTEMPTS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    NsaBinary,
    NsaContinuous,
    NsaLogistic,
    Cutpaste,
    Fpi,
    Pii,
}

impl TaskMode {
    pub const ALL: [TaskMode; 6] = [
        TaskMode::NsaBinary,
        TaskMode::NsaContinuous,
        TaskMode::NsaLogistic,
        TaskMode::Cutpaste,
        TaskMode::Fpi,
        TaskMode::Pii,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskMode::NsaBinary => "nsa-binary",
            TaskMode::NsaContinuous => "nsa-continuous",
            TaskMode::NsaLogistic => "nsa-logistic",
            TaskMode::Cutpaste => "cutpaste",
            TaskMode::Fpi => "fpi",
            TaskMode::Pii => "pii",
        }
    }

    pub fn is_nsa(self) -> bool {
        matches!(self, TaskMode::NsaBinary | TaskMode::NsaContinuous | TaskMode::NsaLogistic)
    }

    /// The label a trainer would use for this task.
    pub fn native_kind(self) -> LabelKind {
        match self {
            TaskMode::NsaBinary | TaskMode::Cutpaste => LabelKind::Binary,
            TaskMode::NsaContinuous => LabelKind::Continuous,
            TaskMode::NsaLogistic => LabelKind::Logistic,
            TaskMode::Fpi | TaskMode::Pii => LabelKind::Interpolation,
        }
    }
}

/// Ablations of the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ablation {
    /// No object or overlap constraints.
    A,
    /// A single patch per sample.
    B,
    /// CutPaste-style rectangle selection.
    C,
    /// Ellipse-union patch outlines.
    D,
}

pub fn apply_ablations(cfg: &ClassConfig, ablations: &[Ablation]) -> ClassConfig {
    let mut out = cfg.clone();
    for a in ablations {
        match a {
            Ablation::A => out.background = None,
            Ablation::B => out.n_max = 1,
            Ablation::C => out.selection_mode = SelectionMode::CutpasteStyle,
            Ablation::D => out.shape_mode = ShapeMode::EllipseUnion,
        }
    }
    out
}

pub fn label_kind_name(kind: LabelKind) -> &'static str {
    match kind {
        LabelKind::Binary => "binary",
        LabelKind::Continuous => "continuous",
        LabelKind::Logistic => "logistic",
        LabelKind::Interpolation => "interpolation",
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub input_dir: PathBuf,
    pub class_config: ClassConfig,
    /// Overrides the config's `[preprocess]` block when set.
    pub preprocessing: Option<PreprocessSpec>,
    pub count: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub mode: TaskMode,
    pub ablations: Vec<Ablation>,
    pub workers: usize,
    pub filter_window: usize,
    pub clone: CloneOptions,
}

impl DatasetSpec {
    pub fn new(input_dir: impl Into<PathBuf>, class_config: ClassConfig, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input_dir: input_dir.into(),
            class_config,
            preprocessing: None,
            count: 1,
            base_seed: 0,
            output_dir: output_dir.into(),
            mode: TaskMode::NsaLogistic,
            ablations: Vec::new(),
            workers: 1,
            filter_window: DEFAULT_FILTER_WINDOW,
            clone: CloneOptions::default(),
        }
    }
}

/// One blended image with its labels; `labels[0]` is the mode-native kind.
#[derive(Debug, Clone)]
pub struct Blended {
    pub image: ImagePlane,
    pub labels: Vec<LabelMap>,
    pub placements: Vec<PatchPlacement>,
    /// Interpolation factor per placement (FPI and PII only).
    pub alphas: Vec<f64>,
}

fn require_interior(placements: &[PatchPlacement], width: usize, height: usize) -> Result<()> {
    for p in placements {
        let dp = p.dst_pixels(width, height);
        if dp.width < 3 || dp.height < 3 {
            return Err(Error::PlacementFailure { constraint: Constraint::Degenerate, tries: 1 });
        }
    }
    Ok(())
}

fn merge_all(labels: Vec<LabelMap>) -> Result<LabelMap> {
    let mut iter = labels.into_iter();
    let first = iter.next().ok_or_else(|| Error::invalid("no placements"))?;
    iter.try_fold(first, |acc, l| merge_max(&acc, &l))
}

/// Blends patches of `img_s` into `img_d` for one task mode.
///
/// Both images must already share size and channel count and lie on the 8-bit grid;
/// the result is quantized to that grid before labeling.
pub fn blend_pair(
    img_s: &ImagePlane,
    img_d: &ImagePlane,
    cfg: &ClassConfig,
    mode: TaskMode,
    filter_window: usize,
    clone: CloneOptions,
    rng: &mut RngStream,
) -> Result<Blended> {
    if !img_s.same_shape(img_d) {
        return Err(Error::dims("source and destination images differ in shape"));
    }
    let (w, h) = (img_d.width(), img_d.height());
    match mode {
        TaskMode::NsaBinary | TaskMode::NsaContinuous | TaskMode::NsaLogistic => {
            let placements = PlacementSampler::new(img_s, img_d, cfg, Location::Free)?.sample(rng)?;
            require_interior(&placements, w, h)?;
            let image = blend_nsa(img_s, img_d, &placements, cfg.gradient_mode, clone)?.quantized_u8();
            let binary = label_binary(&image, img_d, filter_window)?;
            let continuous = label_continuous(&image, img_d, filter_window)?;
            let logistic = label_logistic(&image, img_d, cfg.logistic_y0, cfg.logistic_k, filter_window)?;
            let labels = match mode {
                TaskMode::NsaBinary => vec![binary, continuous, logistic],
                TaskMode::NsaContinuous => vec![continuous, binary, logistic],
                _ => vec![logistic, binary, continuous],
            };
            Ok(Blended { image, labels, placements, alphas: Vec::new() })
        }
        TaskMode::Cutpaste => {
            let unscaled = ClassConfig { s_min: 1.0, s_max: 1.0, ..cfg.clone() };
            let placements = PlacementSampler::new(img_s, img_d, &unscaled, Location::Free)?.sample(rng)?;
            let mut current = img_d.clone();
            let mut labels = Vec::new();
            for p in &placements {
                let (next, label) = blend_cutpaste(img_s, &current, p)?;
                current = next;
                labels.push(label);
            }
            let label = merge_all(labels)?;
            Ok(Blended { image: current.quantized_u8(), labels: vec![label], placements, alphas: Vec::new() })
        }
        TaskMode::Fpi | TaskMode::Pii => {
            let placements = PlacementSampler::new(img_s, img_d, cfg, Location::Same)?.sample(rng)?;
            if mode == TaskMode::Pii {
                require_interior(&placements, w, h)?;
            }
            let mut current = img_d.clone();
            let mut labels = Vec::new();
            let mut alphas = Vec::new();
            for p in &placements {
                let alpha = sample_alpha(rng);
                let (next, label) = if mode == TaskMode::Fpi {
                    blend_fpi(img_s, &current, p, Some(alpha), rng)?
                } else {
                    blend_pii(img_s, &current, p, Some(alpha), rng, clone)?
                };
                current = next;
                labels.push(label);
                alphas.push(alpha);
            }
            let label = merge_all(labels)?;
            Ok(Blended { image: current.quantized_u8(), labels: vec![label], placements, alphas })
        }
    }
}

/// Loads an input image and brings it to the common working form.
pub fn prepare_pair(
    src: &ImagePlane,
    dst: &ImagePlane,
    spec: Option<&PreprocessSpec>,
    rng: &mut RngStream,
) -> Result<(ImagePlane, ImagePlane)> {
    let channels = src.channels().max(dst.channels());
    let (mut s, mut d) = (src.to_channels(channels), dst.to_channels(channels));
    if let Some(spec) = spec {
        let draw = preprocess::draw(spec, rng)?;
        s = preprocess::apply(&s, spec, draw)?;
        d = preprocess::apply(&d, spec, draw)?;
    }
    if s.width() != d.width() || s.height() != d.height() {
        return Err(Error::Data(format!(
            "input images differ in size ({}x{} vs {}x{}) and no preprocessing is configured",
            s.width(),
            s.height(),
            d.width(),
            d.height()
        )));
    }
    Ok((s.quantized_u8(), d.quantized_u8()))
}

/// A generated sample before it is written to disk.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub index: usize,
    pub attempt: u32,
    pub source: usize,
    pub destination: usize,
    pub blended: Blended,
}

fn is_retryable(e: &Error) -> bool {
    matches!(e, Error::PlacementFailure { .. } | Error::NotConverged { .. })
}

/// Sample `index`, retrying placement failures with fresh derived streams.
/// `Ok(Err(reason))` means every attempt failed to place a patch.
pub fn generate_sample(
    inputs: &[PathBuf],
    cfg: &ClassConfig,
    preprocessing: Option<&PreprocessSpec>,
    mode: TaskMode,
    base_seed: u64,
    index: usize,
    filter_window: usize,
    clone: CloneOptions,
) -> Result<std::result::Result<GeneratedSample, String>> {
    let n = inputs.len() as u64;
    let cross = mode != TaskMode::Cutpaste;
    if n == 0 || (cross && n < 2) {
        return Err(Error::Data(format!("mode {} needs at least {} input images", mode.name(), if cross { 2 } else { 1 })));
    }
    let root = RngStream::new(base_seed).derive(index as u64);
    let mut last = String::new();
    for attempt in 0..SAMPLE_ATTEMPTS {
        let mut rng = root.derive(attempt as u64);
        let source = rng.below(n) as usize;
        let destination = if cross { (source + 1 + rng.below(n - 1) as usize) % n as usize } else { source };
        let src = load_image(&inputs[source])?;
        let dst = if destination == source { src.clone() } else { load_image(&inputs[destination])? };
        let (s, d) = prepare_pair(&src, &dst, preprocessing, &mut rng)?;
        let s = if cross { s } else { d.clone() };
        match blend_pair(&s, &d, cfg, mode, filter_window, clone, &mut rng) {
            Ok(blended) => return Ok(Ok(GeneratedSample { index, attempt, source, destination, blended })),
            Err(e) if is_retryable(&e) => last = e.to_string(),
            Err(e) => return Err(e),
        }
    }
    Ok(Err(format!("{SAMPLE_ATTEMPTS} attempts failed; last: {last}")))
}

fn placement_json(p: &PatchPlacement, width: usize, height: usize, alpha: Option<f64>) -> Value {
    let mut v = json!({
        "src_rect": p.src_rect,
        "dst_rect": p.dst_rect,
        "src_pixels": p.src_pixels(width, height),
        "dst_pixels": p.dst_pixels(width, height),
        "scale": p.scale,
        "shape": if p.shape_mask.is_some() { "ellipse_union" } else { "rect" },
        "rejection_counts": p.rejection_counts,
    });
    if let Some(a) = alpha {
        v["alpha"] = json!(a);
    }
    v
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Outcome of a [`synthesize`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisSummary {
    pub written: usize,
    pub skipped: usize,
    pub manifest: PathBuf,
}

/// Writes `count` samples plus `manifest.jsonl` under `spec.output_dir`.
pub fn synthesize(spec: &DatasetSpec) -> Result<SynthesisSummary> {
    if spec.count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let cfg = apply_ablations(&spec.class_config, &spec.ablations);
    cfg.validate()?;
    let preprocessing = spec.preprocessing.or(cfg.preprocess);
    let inputs = list_pngs(&spec.input_dir)?;
    if inputs.is_empty() {
        return Err(Error::Data(format!("no PNG images in {}", spec.input_dir.display())));
    }
    let images_dir = spec.output_dir.join("images");
    let labels_dir = spec.output_dir.join("labels");
    fs::create_dir_all(&images_dir)?;
    fs::create_dir_all(&labels_dir)?;

    let mut ablations = spec.ablations.clone();
    ablations.sort();
    ablations.dedup();
    let ablation_names: Vec<String> = ablations.iter().map(|a| format!("{a:?}")).collect();

    let run = |index: usize| -> Result<Value> {
        let outcome = generate_sample(
            &inputs,
            &cfg,
            preprocessing.as_ref(),
            spec.mode,
            spec.base_seed,
            index,
            spec.filter_window,
            spec.clone,
        )?;
        let mut entry = json!({
            "id": index,
            "mode": spec.mode.name(),
            "base_seed": spec.base_seed,
            "class": cfg.name,
            "ablations": ablation_names,
        });
        match outcome {
            Err(reason) => {
                entry["status"] = json!("skipped");
                entry["reason"] = json!(reason);
            }
            Ok(sample) => {
                let b = &sample.blended;
                let (w, h) = (b.image.width(), b.image.height());
                let image_rel = format!("images/{index:06}.png");
                save_image(&spec.output_dir.join(&image_rel), &b.image)?;
                let mut labels = serde_json::Map::new();
                for label in &b.labels {
                    let kind = label_kind_name(label.kind);
                    let rel = format!("labels/{index:06}_{kind}.png");
                    save_label(&spec.output_dir.join(&rel), label)?;
                    labels.insert(kind.to_string(), json!(rel));
                }
                let placements: Vec<Value> = b
                    .placements
                    .iter()
                    .enumerate()
                    .map(|(k, p)| placement_json(p, w, h, b.alphas.get(k).copied()))
                    .collect();
                entry["status"] = json!("ok");
                entry["attempt"] = json!(sample.attempt);
                entry["stream"] = json!([spec.base_seed, index, sample.attempt]);
                entry["source"] = json!(file_name(&inputs[sample.source]));
                entry["destination"] = json!(file_name(&inputs[sample.destination]));
                entry["gradient_mode"] = json!(cfg.gradient_mode);
                entry["image"] = json!(image_rel);
                entry["label"] = json!(label_kind_name(spec.mode.native_kind()));
                entry["labels"] = Value::Object(labels);
                entry["placements"] = json!(placements);
            }
        }
        Ok(entry)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let entries: Vec<Value> = pool.install(|| (0..spec.count).into_par_iter().map(run).collect::<Result<_>>())?;

    let mut text = String::new();
    let mut skipped = 0;
    for e in &entries {
        if e["status"] == "skipped" {
            skipped += 1;
        }
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    let manifest = spec.output_dir.join("manifest.jsonl");
    fs::write(&manifest, text)?;
    Ok(SynthesisSummary { written: entries.len() - skipped, skipped, manifest })
}
