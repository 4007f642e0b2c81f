//! Side-by-side comparison of the four blending tasks on one image pair.

use crate::config::ClassConfig;
use crate::imaging::{resize_bilinear, BinaryMask, ImagePlane, PixelRect};
use crate::labeler::{LabelKind, LabelMap};
use crate::pipeline::synth::{blend_pair, prepare_pair, Blended, TaskMode};
use crate::poisson::CloneOptions;
use crate::rng::RngStream;
use crate::sampler::PatchPlacement;
use crate::Result;

pub const DEMO_MODES: [TaskMode; 4] = [TaskMode::Cutpaste, TaskMode::Fpi, TaskMode::Pii, TaskMode::NsaLogistic];
const GUTTER: usize = 4;

#[derive(Debug, Clone)]
pub struct DemoPanel {
    pub mode: TaskMode,
    pub blended: Blended,
    /// Mean gradient across the seam of the first placement.
    pub edge: f64,
    /// Every pixel outside the placed rectangles equals the destination.
    pub exterior_identical: bool,
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub source: ImagePlane,
    pub destination: ImagePlane,
    pub panels: Vec<DemoPanel>,
    pub composite: ImagePlane,
}

impl DemoOutput {
    pub fn panel(&self, mode: TaskMode) -> Option<&DemoPanel> {
        self.panels.iter().find(|p| p.mode == mode)
    }
}

fn channel_mean(img: &ImagePlane, x: usize, y: usize) -> f64 {
    let px = img.pixel(x, y);
    px.iter().sum::<f64>() / px.len() as f64
}

/// Mean absolute channel-mean difference across the edges that cross the boundary of `r`.
pub fn boundary_gradient(img: &ImagePlane, r: PixelRect) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..img.height() {
        for x in 0..img.width() {
            for (qx, qy) in [(x + 1, y), (x, y + 1)] {
                if qx < img.width() && qy < img.height() && r.contains(x, y) != r.contains(qx, qy) {
                    sum += (channel_mean(img, x, y) - channel_mean(img, qx, qy)).abs();
                    n += 1;
                }
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Where pasted content meets the destination: the rectangle itself for direct
/// pastes, the clone region inside the fixed 1-px ring for Poisson blends.
pub fn seam_rect(mode: TaskMode, dst: PixelRect) -> PixelRect {
    match mode {
        TaskMode::Cutpaste | TaskMode::Fpi => dst,
        _ => PixelRect {
            x: dst.x + 1,
            y: dst.y + 1,
            width: dst.width.saturating_sub(2),
            height: dst.height.saturating_sub(2),
        },
    }
}

/// Whether `blended` equals `original` outside all destination rectangles.
pub fn exterior_identical(blended: &ImagePlane, original: &ImagePlane, placements: &[PatchPlacement]) -> bool {
    let (w, h) = (original.width(), original.height());
    let rects: Vec<PixelRect> = placements.iter().map(|p| p.dst_pixels(w, h)).collect();
    let covered = BinaryMask::from_fn(w, h, |x, y| rects.iter().any(|r| r.contains(x, y)));
    (0..h).all(|y| (0..w).all(|x| covered.get(x, y) || blended.pixel(x, y) == original.pixel(x, y)))
}

fn label_plane(label: &LabelMap, channels: usize) -> ImagePlane {
    let scale = if label.kind == LabelKind::Continuous { 1.0 / 255.0 } else { 1.0 };
    ImagePlane::from_fn(label.width(), label.height(), channels, |x, y, _| label.map.get(x, y) * scale)
}

fn grid(cells: &[Vec<Option<ImagePlane>>], w: usize, h: usize, channels: usize) -> ImagePlane {
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let rows = cells.len();
    let mut out = ImagePlane::filled(cols * w + (cols + 1) * GUTTER, rows * h + (rows + 1) * GUTTER, channels, 1.0);
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Some(img) = cell {
                let x = GUTTER + c * (w + GUTTER);
                let y = GUTTER + r * (h + GUTTER);
                out.paste(img, x, y, None).expect("cell fits the grid");
            }
        }
    }
    out
}

/// Blends one patch per task into `destination` and lays out a two-row grid:
/// source, destination, then each task's image over its label.
pub fn demo(source: &ImagePlane, destination: &ImagePlane, cfg: &ClassConfig, seed: u64) -> Result<DemoOutput> {
    let source = if source.width() != destination.width() || source.height() != destination.height() {
        resize_bilinear(source, destination.width(), destination.height())?
    } else {
        source.clone()
    };
    let root = RngStream::new(seed);
    let (s, d) = prepare_pair(&source, destination, None, &mut root.derive(u64::MAX))?;
    let single = ClassConfig { n_max: 1, ..cfg.clone() };
    let mut panels = Vec::new();
    for (k, mode) in DEMO_MODES.into_iter().enumerate() {
        let src = if mode == TaskMode::Cutpaste { &d } else { &s };
        let blended = blend_pair(src, &d, &single, mode, 5, CloneOptions::default(), &mut root.derive(k as u64))?;
        let first = blended.placements[0].dst_pixels(d.width(), d.height());
        panels.push(DemoPanel {
            mode,
            edge: boundary_gradient(&blended.image, seam_rect(mode, first)),
            exterior_identical: exterior_identical(&blended.image, &d, &blended.placements),
            blended,
        });
    }
    let ch = d.channels();
    let mut top = vec![Some(s.clone()), Some(d.clone())];
    let mut bottom = vec![None, None];
    for p in &panels {
        top.push(Some(p.blended.image.clone()));
        bottom.push(Some(label_plane(&p.blended.labels[0], ch)));
    }
    let composite = grid(&[top, bottom], d.width(), d.height(), ch);
    Ok(DemoOutput { source: s, destination: d, panels, composite })
}
