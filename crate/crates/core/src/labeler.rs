//! Pixel-wise labels for synthetic anomalies, plus the non-NSA blend modes.

use serde::{Deserialize, Serialize};

use crate::imaging::{median_filter_map, resize_bilinear, BinaryMask, ImagePlane, PixelRect, ScalarMap};
use crate::poisson::{clone_patch, clone_region, CloneOptions, GradientMode};
use crate::rng::RngStream;
use crate::sampler::PatchPlacement;
use crate::{Error, Result};

/// Differences at or below half an 8-bit quantization step count as unchanged.
pub const CHANGE_EPSILON: f64 = 0.5 / 255.0;
pub const DEFAULT_FILTER_WINDOW: usize = 5;
/// Interpolation factor range used when none is supplied.
pub const ALPHA_RANGE: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Binary,
    /// Channel-mean absolute difference in 8-bit intensity units.
    Continuous,
    Logistic,
    /// Patch interpolation factor.
    Interpolation,
}

impl LabelKind {
    pub fn is_bounded(self) -> bool {
        !matches!(self, LabelKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub map: ScalarMap,
    pub kind: LabelKind,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.map.width
    }

    pub fn height(&self) -> usize {
        self.map.height
    }

    pub fn values(&self) -> &[f64] {
        &self.map.data
    }

    pub fn support(&self) -> BinaryMask {
        self.map.support()
    }
}

fn check_pair(a: &ImagePlane, b: &ImagePlane) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::dims(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

fn per_pixel(a: &ImagePlane, b: &ImagePlane, f: impl Fn(&[f64], &[f64]) -> f64) -> ScalarMap {
    let mut out = ScalarMap::zeros(a.width(), a.height());
    for y in 0..a.height() {
        for x in 0..a.width() {
            out.set(x, y, f(a.pixel(x, y), b.pixel(x, y)));
        }
    }
    out
}

/// Unfiltered binary label: 1 where any channel moved by more than [`CHANGE_EPSILON`].
pub fn raw_binary(blended: &ImagePlane, original: &ImagePlane) -> Result<ScalarMap> {
    check_pair(blended, original)?;
    Ok(per_pixel(blended, original, |p, q| {
        let changed = p.iter().zip(q).any(|(a, b)| (a - b).abs() > CHANGE_EPSILON);
        if changed {
            1.0
        } else {
            0.0
        }
    }))
}

/// Unfiltered continuous label in 8-bit units.
pub fn raw_continuous(blended: &ImagePlane, original: &ImagePlane) -> Result<ScalarMap> {
    check_pair(blended, original)?;
    Ok(per_pixel(blended, original, |p, q| {
        let sum: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
        255.0 * sum / p.len() as f64
    }))
}

#[inline]
pub fn logistic(binary: f64, continuous: f64, y0: f64, k: f64) -> f64 {
    binary / (1.0 + (-k * (continuous - y0)).exp())
}

/// Unfiltered logistic label, gated by the binary label.
pub fn raw_logistic(blended: &ImagePlane, original: &ImagePlane, y0: f64, k: f64) -> Result<ScalarMap> {
    if !(k > 0.0) {
        return Err(Error::invalid(format!("logistic steepness must be positive, got {k}")));
    }
    let bin = raw_binary(blended, original)?;
    let cont = raw_continuous(blended, original)?;
    let data = bin.data.iter().zip(&cont.data).map(|(&b, &c)| logistic(b, c, y0, k)).collect();
    ScalarMap::new(bin.width, bin.height, data)
}

pub fn label_binary(blended: &ImagePlane, original: &ImagePlane, filter_window: usize) -> Result<LabelMap> {
    let map = median_filter_map(&raw_binary(blended, original)?, filter_window)?;
    Ok(LabelMap { map, kind: LabelKind::Binary })
}

pub fn label_continuous(blended: &ImagePlane, original: &ImagePlane, filter_window: usize) -> Result<LabelMap> {
    let map = median_filter_map(&raw_continuous(blended, original)?, filter_window)?;
    Ok(LabelMap { map, kind: LabelKind::Continuous })
}

pub fn label_logistic(
    blended: &ImagePlane,
    original: &ImagePlane,
    y0: f64,
    k: f64,
    filter_window: usize,
) -> Result<LabelMap> {
    let map = median_filter_map(&raw_logistic(blended, original, y0, k)?, filter_window)?;
    Ok(LabelMap { map, kind: LabelKind::Logistic })
}

pub fn sample_alpha(rng: &mut RngStream) -> f64 {
    rng.uniform(ALPHA_RANGE.0, ALPHA_RANGE.1)
}

/// `(1 - alpha) * dst + alpha * src`, exact at both ends.
#[inline]
fn interpolate(dst: f64, src: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * dst + alpha * src
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("interpolation factor {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Source patch resized to the destination rectangle, plus that rectangle.
fn source_patch(img_s: &ImagePlane, img_d: &ImagePlane, placement: &PatchPlacement) -> Result<(ImagePlane, PixelRect)> {
    check_pair(img_s, img_d)?;
    let sp = placement.src_pixels(img_s.width(), img_s.height());
    let dp = placement.dst_pixels(img_d.width(), img_d.height());
    let patch = resize_bilinear(&img_s.crop(sp)?, dp.width, dp.height)?;
    Ok((patch, dp))
}

fn shape_in_rect(placement: &PatchPlacement, dp: PixelRect) -> Result<Option<&BinaryMask>> {
    match &placement.shape_mask {
        Some(m) if m.width() != dp.width || m.height() != dp.height => {
            Err(Error::dims("shape mask does not match destination rectangle"))
        }
        other => Ok(other.as_ref()),
    }
}

fn rect_label(width: usize, height: usize, dp: PixelRect, region: &BinaryMask, value: f64, kind: LabelKind) -> LabelMap {
    let mut map = ScalarMap::zeros(width, height);
    for y in 0..dp.height {
        for x in 0..dp.width {
            if region.get(x, y) {
                map.set(dp.x + x, dp.y + y, value);
            }
        }
    }
    LabelMap { map, kind }
}

/// Linear interpolation of the source patch into the destination; label is the factor.
pub fn blend_fpi(
    img_s: &ImagePlane,
    img_d: &ImagePlane,
    placement: &PatchPlacement,
    alpha: Option<f64>,
    rng: &mut RngStream,
) -> Result<(ImagePlane, LabelMap)> {
    let alpha = alpha.unwrap_or_else(|| sample_alpha(rng));
    check_alpha(alpha)?;
    let (patch, dp) = source_patch(img_s, img_d, placement)?;
    let shape = shape_in_rect(placement, dp)?;
    let region = BinaryMask::from_fn(dp.width, dp.height, |x, y| shape.is_none_or(|m| m.get(x, y)));
    let mut out = img_d.clone();
    for y in 0..dp.height {
        for x in 0..dp.width {
            if !region.get(x, y) {
                continue;
            }
            for c in 0..img_d.channels() {
                let d = img_d.get(dp.x + x, dp.y + y, c);
                out.set(dp.x + x, dp.y + y, c, interpolate(d, patch.get(x, y, c), alpha));
            }
        }
    }
    let label = rect_label(img_d.width(), img_d.height(), dp, &region, alpha, LabelKind::Interpolation);
    Ok((out, label))
}

/// Copy-paste of the (resized) source patch; binary label on the pasted area.
pub fn blend_cutpaste(img_s: &ImagePlane, img_d: &ImagePlane, placement: &PatchPlacement) -> Result<(ImagePlane, LabelMap)> {
    let (patch, dp) = source_patch(img_s, img_d, placement)?;
    let shape = shape_in_rect(placement, dp)?;
    let mut out = img_d.clone();
    out.paste(&patch, dp.x, dp.y, shape)?;
    let region = BinaryMask::from_fn(dp.width, dp.height, |x, y| shape.is_none_or(|m| m.get(x, y)));
    let label = rect_label(img_d.width(), img_d.height(), dp, &region, 1.0, LabelKind::Binary);
    Ok((out, label))
}

/// Seamless clone (mixed gradients) of the interpolated patch; label is the factor on Ω.
pub fn blend_pii(
    img_s: &ImagePlane,
    img_d: &ImagePlane,
    placement: &PatchPlacement,
    alpha: Option<f64>,
    rng: &mut RngStream,
    opts: CloneOptions,
) -> Result<(ImagePlane, LabelMap)> {
    let alpha = alpha.unwrap_or_else(|| sample_alpha(rng));
    check_alpha(alpha)?;
    let (patch, dp) = source_patch(img_s, img_d, placement)?;
    let shape = shape_in_rect(placement, dp)?;
    let dst_patch = img_d.crop(dp)?;
    let mixed = ImagePlane::from_fn(dp.width, dp.height, img_d.channels(), |x, y, c| {
        interpolate(dst_patch.get(x, y, c), patch.get(x, y, c), alpha)
    });
    let (out, stats) = clone_patch(&mixed, img_d, dp, GradientMode::Mixed, shape, opts)?;
    if !stats.converged {
        return Err(Error::NotConverged { iterations: stats.iterations, residual: stats.final_residual });
    }
    let region = clone_region(dp.width, dp.height, shape);
    let label = rect_label(img_d.width(), img_d.height(), dp, &region, alpha, LabelKind::Interpolation);
    Ok((out, label))
}

/// Seamless clone of every placement in order, each into the previous result.
pub fn blend_nsa(
    img_s: &ImagePlane,
    img_d: &ImagePlane,
    placements: &[PatchPlacement],
    mode: GradientMode,
    opts: CloneOptions,
) -> Result<ImagePlane> {
    let mut current = img_d.clone();
    for p in placements {
        let (patch, dp) = source_patch(img_s, &current, p)?;
        let shape = shape_in_rect(p, dp)?;
        let (next, stats) = clone_patch(&patch, &current, dp, mode, shape, opts)?;
        if !stats.converged {
            return Err(Error::NotConverged { iterations: stats.iterations, residual: stats.final_residual });
        }
        current = next;
    }
    Ok(current)
}

/// Pointwise maximum of two labels of the same kind.
pub fn merge_max(a: &LabelMap, b: &LabelMap) -> Result<LabelMap> {
    if a.width() != b.width() || a.height() != b.height() || a.kind != b.kind {
        return Err(Error::dims("labels differ in size or kind"));
    }
    let data = a.map.data.iter().zip(&b.map.data).map(|(x, y)| x.max(*y)).collect();
    Ok(LabelMap { map: ScalarMap::new(a.width(), a.height(), data)?, kind: a.kind })
}
