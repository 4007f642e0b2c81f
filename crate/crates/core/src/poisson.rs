//! Discrete Poisson image editing.
//!
//! The clone region Ω is solved on the 5-point stencil: for every `p` in Ω,
//! `|N_p| f_p - Σ_{q ∈ N_p ∩ Ω} f_q = Σ_{q ∈ N_p \ Ω} f*_q + Σ_{q ∈ N_p} v_pq`,
//! where `f*` is the destination and `v_pq` the guidance value on the directed
//! edge `p -> q`. Ω never touches the border of its guidance grid, so every
//! `p` has four neighbors and the system matrix is symmetric positive definite.

use crate::imaging::{resize_bilinear, BinaryMask, ImagePlane, PixelRect, Rect};
use crate::{Error, Result};

/// Margin kept between every rasterized patch and the image border.
pub const RECT_MARGIN: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Guidance is the source gradient.
    #[default]
    Source,
    /// Per edge, the larger-magnitude of source and destination differences.
    Mixed,
}

/// Per-edge guidance values over a rectangular grid placed in a destination image.
///
/// Only the east and south edge of each grid pixel are stored; the reverse
/// directions follow from antisymmetry, `v_qp = -v_pq`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceField {
    width: usize,
    height: usize,
    channels: usize,
    origin: (usize, usize),
    region: BinaryMask,
    east: Vec<f64>,
    south: Vec<f64>,
}

impl GuidanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn region(&self) -> &BinaryMask {
        &self.region
    }

    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    /// Moves the grid so its top-left corner sits at `(x, y)` in the destination.
    pub fn placed_at(mut self, x: usize, y: usize) -> Self {
        self.origin = (x, y);
        self
    }

    /// Guidance on the directed edge from grid pixel `p` to its 4-neighbor `q`.
    pub fn edge(&self, p: (usize, usize), q: (usize, usize), c: usize) -> f64 {
        let idx = |x: usize, y: usize| (y * self.width + x) * self.channels + c;
        match (q.0 as isize - p.0 as isize, q.1 as isize - p.1 as isize) {
            (1, 0) => self.east[idx(p.0, p.1)],
            (-1, 0) => -self.east[idx(q.0, q.1)],
            (0, 1) => self.south[idx(p.0, p.1)],
            (0, -1) => -self.south[idx(q.0, q.1)],
            _ => panic!("{p:?} and {q:?} are not 4-neighbors"),
        }
    }

    fn build(
        src: &ImagePlane,
        region: &BinaryMask,
        mut pick: impl FnMut(usize, usize, usize, usize, usize, f64) -> f64,
    ) -> Self {
        let (w, h, ch) = (src.width(), src.height(), src.channels());
        let mut east = vec![0.0; w * h * ch];
        let mut south = vec![0.0; w * h * ch];
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let i = (y * w + x) * ch + c;
                    if x + 1 < w {
                        east[i] = pick(x, y, x + 1, y, c, src.get(x, y, c) - src.get(x + 1, y, c));
                    }
                    if y + 1 < h {
                        south[i] = pick(x, y, x, y + 1, c, src.get(x, y, c) - src.get(x, y + 1, c));
                    }
                }
            }
        }
        GuidanceField {
            width: w,
            height: h,
            channels: ch,
            origin: (0, 0),
            region: region.clone(),
            east,
            south,
        }
    }
}

/// Guidance from the source patch alone: `v_pq = g_p - g_q`.
pub fn guidance_source(source_patch: &ImagePlane, region: &BinaryMask) -> Result<GuidanceField> {
    check_region(source_patch, region)?;
    Ok(GuidanceField::build(source_patch, region, |_, _, _, _, _, d| d))
}

/// Mixed guidance: the destination difference wins only when strictly larger in magnitude.
pub fn guidance_mixed(
    source_patch: &ImagePlane,
    destination_patch: &ImagePlane,
    region: &BinaryMask,
) -> Result<GuidanceField> {
    check_region(source_patch, region)?;
    if !source_patch.same_shape(destination_patch) {
        return Err(Error::dims("source and destination patches differ in shape"));
    }
    let dst = destination_patch;
    Ok(GuidanceField::build(source_patch, region, |px, py, qx, qy, c, src_diff| {
        let dst_diff = dst.get(px, py, c) - dst.get(qx, qy, c);
        if dst_diff.abs() > src_diff.abs() {
            dst_diff
        } else {
            src_diff
        }
    }))
}

fn check_region(patch: &ImagePlane, region: &BinaryMask) -> Result<()> {
    if patch.width() != region.width() || patch.height() != region.height() {
        return Err(Error::dims(format!(
            "patch is {}x{} but region is {}x{}",
            patch.width(),
            patch.height(),
            region.width(),
            region.height()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolveStats {
    /// Largest iteration count over channels.
    pub iterations: usize,
    /// Largest relative residual `‖b - A f‖₂ / ‖b‖₂` over channels, before clamping.
    pub final_residual: f64,
    pub converged: bool,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-5;

pub fn default_max_iter(region_pixels: usize) -> usize {
    (10.0 * (region_pixels as f64).sqrt()) as usize + 1000
}

/// The assembled 5-point system for one placed guidance field.
pub(crate) struct PoissonSystem {
    /// Destination coordinates of each unknown.
    pub pixels: Vec<(usize, usize)>,
    /// Unknown index of each 4-neighbor, or `None` when it is a boundary pixel.
    pub neighbors: Vec<[Option<usize>; 4]>,
    /// Right-hand side per channel.
    pub rhs: Vec<Vec<f64>>,
}

const OFFSETS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl PoissonSystem {
    pub fn assemble(destination: &ImagePlane, field: &GuidanceField) -> Result<Self> {
        let (ox, oy) = field.origin;
        if destination.channels() != field.channels {
            return Err(Error::dims("guidance and destination channel counts differ"));
        }
        if ox + field.width > destination.width() || oy + field.height > destination.height() {
            return Err(Error::invalid("guidance grid extends outside the destination"));
        }
        let region = &field.region;
        let mut index = vec![None; field.width * field.height];
        let mut pixels = Vec::new();
        for y in 0..field.height {
            for x in 0..field.width {
                if region.get(x, y) {
                    if x == 0 || y == 0 || x + 1 == field.width || y + 1 == field.height {
                        return Err(Error::invalid("clone region touches the border"));
                    }
                    index[y * field.width + x] = Some(pixels.len());
                    pixels.push((x, y));
                }
            }
        }
        let mut neighbors = Vec::with_capacity(pixels.len());
        let mut rhs = vec![vec![0.0; pixels.len()]; field.channels];
        for (i, &(x, y)) in pixels.iter().enumerate() {
            let mut nb = [None; 4];
            for (k, (dx, dy)) in OFFSETS.iter().enumerate() {
                let qx = (x as isize + dx) as usize;
                let qy = (y as isize + dy) as usize;
                nb[k] = index[qy * field.width + qx];
                for (c, b) in rhs.iter_mut().enumerate() {
                    b[i] += field.edge((x, y), (qx, qy), c);
                    if nb[k].is_none() {
                        b[i] += destination.get(ox + qx, oy + qy, c);
                    }
                }
            }
            neighbors.push(nb);
        }
        let pixels = pixels.into_iter().map(|(x, y)| (ox + x, oy + y)).collect();
        Ok(Self { pixels, neighbors, rhs })
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, nb) in self.neighbors.iter().enumerate() {
            let mut acc = 4.0 * x[i];
            for j in nb.iter().flatten() {
                acc -= x[*j];
            }
            out[i] = acc;
        }
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        ax.iter().zip(b).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient. Returns iterations used.
fn pcg(sys: &PoissonSystem, b: &[f64], x: &mut [f64], abs_tol: f64, max_iter: usize) -> usize {
    let n = b.len();
    let inv_diag = 0.25;
    let mut r = vec![0.0; n];
    sys.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if dot(&r, &r).sqrt() <= abs_tol {
        return 0;
    }
    let mut z: Vec<f64> = r.iter().map(|v| v * inv_diag).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        sys.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return it;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= abs_tol {
            return it;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag;
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    max_iter
}

/// Unclamped per-channel solution values for every unknown of the system.
pub(crate) fn solve_system(
    destination: &ImagePlane,
    sys: &PoissonSystem,
    tolerance: f64,
    max_iter: usize,
) -> (Vec<Vec<f64>>, SolveStats) {
    let mut stats = SolveStats { iterations: 0, final_residual: 0.0, converged: true };
    let mut solutions = Vec::with_capacity(sys.rhs.len());
    for (c, b) in sys.rhs.iter().enumerate() {
        let mut x: Vec<f64> = sys.pixels.iter().map(|&(px, py)| destination.get(px, py, c)).collect();
        let b_norm = dot(b, b).sqrt();
        let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
        let iters = pcg(sys, b, &mut x, tolerance * scale, max_iter);
        let residual = sys.residual_norm(&x, b) / scale;
        stats.iterations = stats.iterations.max(iters);
        stats.final_residual = stats.final_residual.max(residual);
        stats.converged &= residual <= tolerance;
        solutions.push(x);
    }
    (solutions, stats)
}

/// Solution values before clamping, one vector per channel in `pixels` order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    /// Destination coordinates of the unknowns, row-major over the guidance grid.
    pub pixels: Vec<(usize, usize)>,
    pub values: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

pub fn solve_poisson_raw(
    destination: &ImagePlane,
    field: &GuidanceField,
    tolerance: f64,
    max_iter: usize,
) -> Result<RawSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let sys = PoissonSystem::assemble(destination, field)?;
    let (values, stats) = solve_system(destination, &sys, tolerance, max_iter);
    Ok(RawSolution { pixels: sys.pixels, values, stats })
}

/// Solves the Dirichlet problem for `field` inside `destination`.
///
/// Pixels outside Ω are copied bit-for-bit; Ω is clamped to `[0, 1]` after the
/// solve. A non-converged solve is reported through `SolveStats::converged`.
pub fn solve_poisson(
    destination: &ImagePlane,
    field: &GuidanceField,
    tolerance: f64,
    max_iter: usize,
) -> Result<(ImagePlane, SolveStats)> {
    let raw = solve_poisson_raw(destination, field, tolerance, max_iter)?;
    let mut out = destination.clone();
    for (c, x) in raw.values.iter().enumerate() {
        for (i, &(px, py)) in raw.pixels.iter().enumerate() {
            out.set(px, py, c, x[i]);
        }
    }
    Ok((out, raw.stats))
}

/// Solver settings for [`seamless_clone_with`]. `max_iter = None` uses [`default_max_iter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloneOptions {
    pub tolerance: f64,
    pub max_iter: Option<usize>,
}

impl Default for CloneOptions {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_iter: None }
    }
}

/// Clone region for a `width x height` patch: everything but the outer ring,
/// intersected with `shape` when given.
pub fn clone_region(width: usize, height: usize, shape: Option<&BinaryMask>) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        x > 0 && y > 0 && x + 1 < width && y + 1 < height && shape.is_none_or(|m| m.get(x, y))
    })
}

/// Seamlessly clones `src_rect` of `source` into `dst_rect` of `destination`.
pub fn seamless_clone(
    source: &ImagePlane,
    destination: &ImagePlane,
    src_rect: &Rect,
    dst_rect: &Rect,
    mode: GradientMode,
    shape_mask: Option<&BinaryMask>,
) -> Result<ImagePlane> {
    let (img, stats) = seamless_clone_with(
        source,
        destination,
        src_rect,
        dst_rect,
        mode,
        shape_mask,
        CloneOptions::default(),
    )?;
    if !stats.converged {
        return Err(Error::NotConverged { iterations: stats.iterations, residual: stats.final_residual });
    }
    Ok(img)
}

pub fn seamless_clone_with(
    source: &ImagePlane,
    destination: &ImagePlane,
    src_rect: &Rect,
    dst_rect: &Rect,
    mode: GradientMode,
    shape_mask: Option<&BinaryMask>,
    opts: CloneOptions,
) -> Result<(ImagePlane, SolveStats)> {
    let src_px = src_rect.to_pixels(source.width(), source.height(), RECT_MARGIN);
    let dst_px = dst_rect.to_pixels(destination.width(), destination.height(), RECT_MARGIN);
    let patch = resize_bilinear(&source.crop(src_px)?, dst_px.width, dst_px.height)?;
    clone_patch(&patch, destination, dst_px, mode, shape_mask, opts)
}

/// Clones an already-sized patch into `dst_px`.
pub fn clone_patch(
    patch: &ImagePlane,
    destination: &ImagePlane,
    dst_px: PixelRect,
    mode: GradientMode,
    shape_mask: Option<&BinaryMask>,
    opts: CloneOptions,
) -> Result<(ImagePlane, SolveStats)> {
    if dst_px.width <= 2 || dst_px.height <= 2 {
        return Err(Error::invalid(format!(
            "destination patch {}x{} has no interior",
            dst_px.width, dst_px.height
        )));
    }
    if patch.channels() != destination.channels() {
        return Err(Error::dims("source and destination channel counts differ"));
    }
    if patch.width() != dst_px.width || patch.height() != dst_px.height {
        return Err(Error::dims("patch does not match destination rectangle"));
    }
    if let Some(m) = shape_mask {
        if m.width() != dst_px.width || m.height() != dst_px.height {
            return Err(Error::dims("shape mask does not match destination rectangle"));
        }
    }
    let region = clone_region(dst_px.width, dst_px.height, shape_mask);
    let field = match mode {
        GradientMode::Source => guidance_source(patch, &region)?,
        GradientMode::Mixed => guidance_mixed(patch, &destination.crop(dst_px)?, &region)?,
    }
    .placed_at(dst_px.x, dst_px.y);
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(region.count()));
    solve_poisson(destination, &field, opts.tolerance, max_iter)
}
