//! Constrained patch placement.
//!
//! Every size symbol is a fraction of the image dimension; conversion to pixels
//! happens only when a [`Rect`] is rasterized (with [`RECT_MARGIN`]).

use serde::Serialize;

pub use crate::config::{BackgroundConstraints, ClassConfig, SelectionMode, ShapeMode};
use crate::error::Constraint;
use crate::imaging::{object_mask, BinaryMask, ImagePlane, PixelRect, Rect};
use crate::poisson::RECT_MARGIN;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Attempts per constraint loop before giving up.
pub const RETRY_BUDGET: usize = 200;

/// Offset added to the Gamma draw before truncation.
pub const SIZE_OFFSET: f64 = 0.06;
pub const SIZE_GAMMA_SHAPE: f64 = 2.0;
pub const SIZE_GAMMA_SCALE: f64 = 0.1;
pub const SCALE_MEAN: f64 = 1.0;
pub const SCALE_STD_DEV: f64 = 0.25;
pub const ELLIPSE_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RejectionCounts {
    pub source_tries: usize,
    pub dest_tries: usize,
}

/// One accepted source-rectangle to destination-rectangle assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPlacement {
    pub src_rect: Rect,
    pub dst_rect: Rect,
    pub scale: f64,
    /// Clone-region outline in destination-patch pixels, when not rectangular.
    pub shape_mask: Option<BinaryMask>,
    pub rejection_counts: RejectionCounts,
}

impl PatchPlacement {
    pub fn src_pixels(&self, width: usize, height: usize) -> PixelRect {
        self.src_rect.to_pixels(width, height, RECT_MARGIN)
    }

    pub fn dst_pixels(&self, width: usize, height: usize) -> PixelRect {
        self.dst_rect.to_pixels(width, height, RECT_MARGIN)
    }
}

/// Truncated-Gamma patch size `(w_frac, h_frac)`.
pub fn sample_patch_size(cfg: &ClassConfig, rng: &mut RngStream) -> (f64, f64) {
    let rw = rng.gamma(SIZE_GAMMA_SHAPE, SIZE_GAMMA_SCALE);
    let rh = rng.gamma(SIZE_GAMMA_SHAPE, SIZE_GAMMA_SCALE);
    (
        (SIZE_OFFSET + rw).max(cfg.w_min).min(cfg.w_max),
        (SIZE_OFFSET + rh).max(cfg.h_min).min(cfg.h_max),
    )
}

/// Fraction of the rasterized `rect` covered by `mask`.
pub fn object_fraction(mask: &BinaryMask, rect: &Rect) -> f64 {
    let px = rect.to_pixels(mask.width(), mask.height(), RECT_MARGIN);
    mask.count_in(px) as f64 / px.area() as f64
}

/// Object mask of the source patch after resizing to the destination patch size.
pub fn resized_patch_mask(mask_s: &BinaryMask, src_rect: &Rect, dst_rect: &Rect) -> BinaryMask {
    let sp = src_rect.to_pixels(mask_s.width(), mask_s.height(), RECT_MARGIN);
    let dp = dst_rect.to_pixels(mask_s.width(), mask_s.height(), RECT_MARGIN);
    mask_s.crop(sp).resize_nearest(dp.width, dp.height)
}

/// Fraction of the resized source object that lands on destination object pixels.
pub fn overlap_fraction(mask_d: &BinaryMask, dst_rect: &Rect, resized_src_mask: &BinaryMask) -> f64 {
    let dp = dst_rect.to_pixels(mask_d.width(), mask_d.height(), RECT_MARGIN);
    let total = resized_src_mask.count();
    if total == 0 {
        return 0.0;
    }
    let dst = mask_d.crop(dp);
    dst.intersection_count(resized_src_mask) as f64 / total as f64
}

/// Uniform source center, retried until the object fraction exceeds `t_object`.
///
/// Returns the rectangle and the number of candidates drawn.
pub fn sample_source_rect(
    img: &ImagePlane,
    mask: Option<&BinaryMask>,
    cfg: &ClassConfig,
    rng: &mut RngStream,
) -> Result<(Rect, usize)> {
    let bg = cfg.background;
    if bg.is_some() && mask.is_none() {
        return Err(Error::invalid("object constraints enabled but no source mask given"));
    }
    check_mask(img, mask)?;
    for tries in 1..=RETRY_BUDGET {
        let (w, h) = sample_patch_size(cfg, rng);
        let cx = rng.uniform(cfg.w_min / 2.0, 1.0 - cfg.w_min / 2.0);
        let cy = rng.uniform(cfg.h_min / 2.0, 1.0 - cfg.h_min / 2.0);
        let rect = Rect::new(cx, cy, w, h);
        match (bg, mask) {
            (Some(bg), Some(m)) if object_fraction(m, &rect) <= bg.t_object => continue,
            _ => return Ok((rect, tries)),
        }
    }
    Err(Error::PlacementFailure { constraint: Constraint::SourceObject, tries: RETRY_BUDGET })
}

/// Random rescale `s = max(w_min/w, h_min/h, min(r_s, w_max/w, h_max/h))`, clipped to `[s_min, s_max]`.
pub fn sample_scale(src_rect: &Rect, cfg: &ClassConfig, rng: &mut RngStream) -> f64 {
    let (w, h) = (src_rect.width_frac, src_rect.height_frac);
    let rs = rng.normal(SCALE_MEAN, SCALE_STD_DEV);
    let s = (cfg.w_min / w)
        .max(cfg.h_min / h)
        .max(rs.min(cfg.w_max / w).min(cfg.h_max / h));
    s.clamp(cfg.s_min, cfg.s_max)
}

/// Rescales the source patch and finds a destination center satisfying the object
/// and overlap constraints.
pub fn sample_destination(
    img_d: &ImagePlane,
    mask_d: Option<&BinaryMask>,
    src_rect: &Rect,
    mask_s: Option<&BinaryMask>,
    cfg: &ClassConfig,
    rng: &mut RngStream,
) -> Result<PatchPlacement> {
    let bg = cfg.background;
    if bg.is_some() && (mask_d.is_none() || mask_s.is_none()) {
        return Err(Error::invalid("object constraints enabled but masks are missing"));
    }
    check_mask(img_d, mask_d)?;
    let scale = sample_scale(src_rect, cfg, rng);
    let (w, h) = (src_rect.width_frac * scale, src_rect.height_frac * scale);
    let (mx, my) = (RECT_MARGIN as f64 / img_d.width() as f64, RECT_MARGIN as f64 / img_d.height() as f64);
    let mut resized: Option<BinaryMask> = None;
    let mut failed = Constraint::DestinationObject;
    for tries in 1..=RETRY_BUDGET {
        let cx = rng.uniform(w / 2.0 + mx, 1.0 - w / 2.0 - mx);
        let cy = rng.uniform(h / 2.0 + my, 1.0 - h / 2.0 - my);
        let dst_rect = Rect::new(cx, cy, w, h);
        if let (Some(bg), Some(md), Some(ms)) = (bg, mask_d, mask_s) {
            if object_fraction(md, &dst_rect) <= bg.t_object {
                failed = Constraint::DestinationObject;
                continue;
            }
            let rm = resized.get_or_insert_with(|| resized_patch_mask(ms, src_rect, &dst_rect));
            if overlap_fraction(md, &dst_rect, rm) <= bg.t_overlap {
                failed = Constraint::Overlap;
                continue;
            }
        }
        return Ok(PatchPlacement {
            src_rect: *src_rect,
            dst_rect,
            scale,
            shape_mask: None,
            rejection_counts: RejectionCounts { source_tries: 0, dest_tries: tries },
        });
    }
    Err(Error::PlacementFailure { constraint: failed, tries: RETRY_BUDGET })
}

fn check_mask(img: &ImagePlane, mask: Option<&BinaryMask>) -> Result<()> {
    match mask {
        Some(m) if m.width() != img.width() || m.height() != img.height() => {
            Err(Error::dims("object mask does not match image"))
        }
        _ => Ok(()),
    }
}

/// Whether the destination patch reuses the source location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// Independent destination location with random rescale.
    Free,
    /// Destination rectangle equals the source rectangle.
    Same,
}

/// Precomputed object masks for one source/destination pair.
pub struct PlacementSampler<'a> {
    img_s: &'a ImagePlane,
    img_d: &'a ImagePlane,
    mask_s: Option<BinaryMask>,
    mask_d: Option<BinaryMask>,
    cfg: &'a ClassConfig,
    location: Location,
}

impl<'a> PlacementSampler<'a> {
    pub fn new(img_s: &'a ImagePlane, img_d: &'a ImagePlane, cfg: &'a ClassConfig, location: Location) -> Result<Self> {
        if img_s.width() != img_d.width() || img_s.height() != img_d.height() {
            return Err(Error::dims("source and destination images differ in size"));
        }
        let (mask_s, mask_d) = match &cfg.background {
            Some(bg) => (
                Some(object_mask(img_s, bg.brightness, bg.t_brightness)),
                Some(object_mask(img_d, bg.brightness, bg.t_brightness)),
            ),
            None => (None, None),
        };
        Ok(Self { img_s, img_d, mask_s, mask_d, cfg, location })
    }

    pub fn source_mask(&self) -> Option<&BinaryMask> {
        self.mask_s.as_ref()
    }

    pub fn destination_mask(&self) -> Option<&BinaryMask> {
        self.mask_d.as_ref()
    }

    /// One placement according to the configured selection mode.
    pub fn sample_one(&self, rng: &mut RngStream) -> Result<PatchPlacement> {
        let mut placement = match self.cfg.selection_mode {
            SelectionMode::CutpasteStyle => sample_cutpaste_style(self.img_d, rng)?,
            SelectionMode::FpiStyle => sample_fpi_style(self.img_d, rng)?,
            SelectionMode::Nsa => {
                let (src_rect, source_tries) =
                    sample_source_rect(self.img_s, self.mask_s.as_ref(), self.cfg, rng)?;
                match self.location {
                    Location::Same => PatchPlacement {
                        src_rect,
                        dst_rect: src_rect,
                        scale: 1.0,
                        shape_mask: None,
                        rejection_counts: RejectionCounts { source_tries, dest_tries: 0 },
                    },
                    Location::Free => {
                        let mut p = sample_destination(
                            self.img_d,
                            self.mask_d.as_ref(),
                            &src_rect,
                            self.mask_s.as_ref(),
                            self.cfg,
                            rng,
                        )?;
                        p.rejection_counts.source_tries = source_tries;
                        p
                    }
                }
            }
        };
        if self.cfg.shape_mode == ShapeMode::EllipseUnion {
            let dp = placement.dst_pixels(self.img_d.width(), self.img_d.height());
            if dp.width < 3 || dp.height < 3 {
                return Err(Error::PlacementFailure { constraint: Constraint::Degenerate, tries: 1 });
            }
            placement.shape_mask = Some(ellipse_union_mask(dp.width, dp.height, ELLIPSE_COUNT, rng));
        }
        Ok(placement)
    }

    /// The mandatory first patch plus one extra patch per successful fair coin
    /// out of `n_max - 1`. Extra placements that exhaust the budget are dropped.
    pub fn sample(&self, rng: &mut RngStream) -> Result<Vec<PatchPlacement>> {
        let extra_coins = match self.cfg.selection_mode {
            SelectionMode::Nsa => self.cfg.n_max.saturating_sub(1),
            _ => 0,
        };
        let heads = (0..extra_coins).filter(|_| rng.coin()).count();
        let mut out = Vec::with_capacity(1 + heads);
        out.push(self.sample_one(rng)?);
        for _ in 0..heads {
            match self.sample_one(rng) {
                Ok(p) => out.push(p),
                Err(Error::PlacementFailure { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

/// Placements for blending patches of `img_s` into `img_d`.
pub fn sample_placements(
    img_s: &ImagePlane,
    img_d: &ImagePlane,
    cfg: &ClassConfig,
    rng: &mut RngStream,
) -> Result<Vec<PatchPlacement>> {
    PlacementSampler::new(img_s, img_d, cfg, Location::Free)?.sample(rng)
}

pub const CUTPASTE_AREA: (f64, f64) = (0.02, 0.15);
pub const CUTPASTE_ASPECT: (f64, f64) = (0.3, 3.3);

/// CutPaste-style patch: area ratio `U(0.02, 0.15)`, aspect ratio uniform on
/// `(0.3, 1) ∪ (1, 3.3)`, source and destination placed independently and
/// entirely inside the image, no resize.
pub fn sample_cutpaste_style(img: &ImagePlane, rng: &mut RngStream) -> Result<PatchPlacement> {
    let (width, height) = (img.width(), img.height());
    if width < 16 || height < 16 {
        return Err(Error::invalid("cutpaste-style sampling needs at least 16x16 pixels"));
    }
    let (wd, hd) = (width as f64, height as f64);
    let (mx, my) = (RECT_MARGIN as f64 / wd, RECT_MARGIN as f64 / hd);
    loop {
        let area = rng.uniform(CUTPASTE_AREA.0, CUTPASTE_AREA.1);
        let aspect = rng.uniform(CUTPASTE_ASPECT.0, CUTPASTE_ASPECT.1);
        if area <= CUTPASTE_AREA.0 || aspect <= CUTPASTE_ASPECT.0 || aspect == 1.0 {
            continue;
        }
        // aspect is the pixel width / height ratio
        let w = (area * aspect * hd / wd).sqrt();
        let h = (area * wd / (aspect * hd)).sqrt();
        if w + 2.0 * mx > 1.0 || h + 2.0 * my > 1.0 {
            continue;
        }
        let mut center = || {
            let cx = rng.uniform(w / 2.0 + mx, 1.0 - w / 2.0 - mx);
            let cy = rng.uniform(h / 2.0 + my, 1.0 - h / 2.0 - my);
            Rect::new(cx, cy, w, h)
        };
        let src_rect = center();
        let dst_rect = center();
        return Ok(PatchPlacement {
            src_rect,
            dst_rect,
            scale: 1.0,
            shape_mask: None,
            rejection_counts: RejectionCounts { source_tries: 1, dest_tries: 1 },
        });
    }
}

/// FPI-style patch: square side `U(0.1, 0.4)` of the image, center in the core
/// 80%, truncated at the border, same source and destination location.
pub fn sample_fpi_style(img: &ImagePlane, rng: &mut RngStream) -> Result<PatchPlacement> {
    let (width, height) = (img.width(), img.height());
    let side = rng.uniform(0.1, 0.4);
    let cx = rng.uniform(0.1, 0.9);
    let cy = rng.uniform(0.1, 0.9);
    let clip = |center: f64, dim: usize| {
        let d = dim as f64;
        let lo = ((center - side / 2.0) * d).round().max(RECT_MARGIN as f64) as usize;
        let hi = ((center + side / 2.0) * d).round().min((dim - RECT_MARGIN) as f64) as usize;
        (lo, hi.max(lo + 1))
    };
    let (x0, x1) = clip(cx, width);
    let (y0, y1) = clip(cy, height);
    let px = PixelRect { x: x0, y: y0, width: x1 - x0, height: y1 - y0 };
    let rect = Rect::from_pixels(px, width, height);
    Ok(PatchPlacement {
        src_rect: rect,
        dst_rect: rect,
        scale: 1.0,
        shape_mask: None,
        rejection_counts: RejectionCounts { source_tries: 1, dest_tries: 0 },
    })
}

/// Union of `count` axis-aligned ellipses over a `width x height` patch.
///
/// Centers are uniform in the patch and semi-axes uniform in `[10%, 50%]` of the
/// patch dimensions. Resampled until at least one pixel off the outer ring is set,
/// so the clone region is never empty.
pub fn ellipse_union_mask(width: usize, height: usize, count: usize, rng: &mut RngStream) -> BinaryMask {
    assert!(width >= 3 && height >= 3, "ellipse masks need at least 3x3 pixels");
    let (wd, hd) = (width as f64, height as f64);
    loop {
        let ellipses: Vec<(f64, f64, f64, f64)> = (0..count)
            .map(|_| {
                let cx = rng.uniform(0.0, wd);
                let cy = rng.uniform(0.0, hd);
                let a = rng.uniform(0.1, 0.5) * wd;
                let b = rng.uniform(0.1, 0.5) * hd;
                (cx, cy, a, b)
            })
            .collect();
        let mask = BinaryMask::from_fn(width, height, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            ellipses.iter().any(|&(cx, cy, a, b)| {
                let (u, v) = ((px - cx) / a, (py - cy) / b);
                u * u + v * v <= 1.0
            })
        });
        let interior_hit = (1..height - 1).any(|y| (1..width - 1).any(|x| mask.get(x, y)));
        if interior_hit {
            return mask;
        }
    }
}
