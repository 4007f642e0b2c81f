//! Pixel containers and the elementary image operations shared by every stage.

use crate::{Error, Result};

/// Floating-point image with samples in `[0, 1]`, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image from a per-sample function; results are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(width > 0 && height > 0 && (channels == 1 || channels == 3));
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp_unit(f(x, y, c)));
                }
            }
        }
        Self { width, height, channels, data }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::from_fn(width, height, channels, |_, _, _| value)
    }

    pub(crate) fn from_raw_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Self { width, height, channels, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn same_shape(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub(crate) fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = clamp_unit(v);
    }

    /// Channel-mean brightness of a pixel in `[0, 1]`.
    #[inline]
    pub fn brightness(&self, x: usize, y: usize) -> f64 {
        let p = self.pixel(x, y);
        p.iter().sum::<f64>() / p.len() as f64
    }

    pub fn crop(&self, r: PixelRect) -> Result<ImagePlane> {
        if r.x + r.width > self.width || r.y + r.height > self.height || r.width == 0 || r.height == 0 {
            return Err(Error::invalid(format!(
                "crop {r:?} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(r.width * r.height * self.channels);
        for y in r.y..r.y + r.height {
            let start = (y * self.width + r.x) * self.channels;
            data.extend_from_slice(&self.data[start..start + r.width * self.channels]);
        }
        Ok(Self { width: r.width, height: r.height, channels: self.channels, data })
    }

    /// Overwrites the region at `(x, y)` with `patch`, optionally only where `mask` is set.
    pub fn paste(&mut self, patch: &ImagePlane, x: usize, y: usize, mask: Option<&BinaryMask>) -> Result<()> {
        if patch.channels != self.channels {
            return Err(Error::dims("channel count differs between patch and image"));
        }
        if x + patch.width > self.width || y + patch.height > self.height {
            return Err(Error::invalid("paste region outside image"));
        }
        if let Some(m) = mask {
            if m.width() != patch.width || m.height() != patch.height {
                return Err(Error::dims("paste mask does not match patch"));
            }
        }
        for py in 0..patch.height {
            for px in 0..patch.width {
                if mask.is_some_and(|m| !m.get(px, py)) {
                    continue;
                }
                for c in 0..self.channels {
                    self.set(x + px, y + py, c, patch.get(px, py, c));
                }
            }
        }
        Ok(())
    }

    /// Replicates a gray image to RGB, or averages RGB down to gray.
    pub fn to_channels(&self, channels: usize) -> ImagePlane {
        if channels == self.channels {
            return self.clone();
        }
        ImagePlane::from_fn(self.width, self.height, channels, |x, y, c| {
            if channels == 3 {
                self.get(x, y, 0)
            } else {
                let _ = c;
                self.brightness(x, y)
            }
        })
    }

    /// Snaps every sample onto the 8-bit grid `k / 255`.
    pub fn quantized_u8(&self) -> ImagePlane {
        let data = self.data.iter().map(|v| (v * 255.0).round() / 255.0).collect();
        Self { data, ..*self }
    }

    /// One channel extracted as an image.
    pub fn channel(&self, c: usize) -> ImagePlane {
        ImagePlane::from_fn(self.width, self.height, 1, |x, y, _| self.get(x, y, c))
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Unbounded single-channel map (labels, predictions).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!("{} values for a {width}x{height} map", data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn from_plane(plane: &ImagePlane) -> Result<Self> {
        if plane.channels() != 1 {
            return Err(Error::invalid("expected a single-channel image"));
        }
        Ok(Self { width: plane.width(), height: plane.height(), data: plane.data().to_vec() })
    }

    pub fn support(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.get(x, y) != 0.0)
    }
}

/// One boolean per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::dims(format!("{} bits for a {width}x{height} mask", bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> BinaryMask {
        Self { bits: self.bits.iter().map(|b| !b).collect(), ..*self }
    }

    /// Number of pixels set in both masks.
    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count()
    }

    pub fn count_in(&self, r: PixelRect) -> usize {
        let mut n = 0;
        for y in r.y..r.y + r.height {
            n += self.bits[y * self.width + r.x..y * self.width + r.x + r.width]
                .iter()
                .filter(|&&b| b)
                .count();
        }
        n
    }

    pub fn crop(&self, r: PixelRect) -> BinaryMask {
        BinaryMask::from_fn(r.width, r.height, |x, y| self.get(r.x + x, r.y + y))
    }

    /// Nearest-neighbor resampling with half-pixel centers.
    pub fn resize_nearest(&self, width: usize, height: usize) -> BinaryMask {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        BinaryMask::from_fn(width, height, |x, y| {
            let u = (((x as f64 + 0.5) * sx).floor() as usize).min(self.width - 1);
            let v = (((y as f64 + 0.5) * sy).floor() as usize).min(self.height - 1);
            self.get(u, v)
        })
    }
}

/// Integer pixel rectangle `[x, x + width) x [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl PixelRect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

/// Rectangle in fractional image coordinates: center in `[0, 1]`, size in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub center_x: f64,
    pub center_y: f64,
    pub width_frac: f64,
    pub height_frac: f64,
}

impl Rect {
    pub fn new(center_x: f64, center_y: f64, width_frac: f64, height_frac: f64) -> Self {
        Self { center_x, center_y, width_frac, height_frac }
    }

    /// Rasterizes into a `width x height` image, keeping `margin` pixels clear of the border.
    ///
    /// Size is `max(1, round(frac * dim))` capped at `dim - 2 * margin`; the top-left
    /// corner is `round(center * dim - size / 2)` clamped so the rectangle fits.
    pub fn to_pixels(&self, width: usize, height: usize, margin: usize) -> PixelRect {
        let (x, w) = rasterize_axis(self.center_x, self.width_frac, width, margin);
        let (y, h) = rasterize_axis(self.center_y, self.height_frac, height, margin);
        PixelRect { x, y, width: w, height: h }
    }

    /// The fractional rectangle whose rasterization is exactly `r`.
    pub fn from_pixels(r: PixelRect, width: usize, height: usize) -> Rect {
        Rect {
            center_x: (r.x as f64 + r.width as f64 / 2.0) / width as f64,
            center_y: (r.y as f64 + r.height as f64 / 2.0) / height as f64,
            width_frac: r.width as f64 / width as f64,
            height_frac: r.height as f64 / height as f64,
        }
    }
}

fn rasterize_axis(center: f64, frac: f64, dim: usize, margin: usize) -> (usize, usize) {
    let avail = dim.saturating_sub(2 * margin).max(1);
    let size = ((frac * dim as f64).round().max(1.0) as usize).min(avail);
    let start = (center * dim as f64 - size as f64 / 2.0).round();
    let lo = margin.min(dim - size) as f64;
    let hi = (dim - size).saturating_sub(margin).max(lo as usize) as f64;
    (start.clamp(lo, hi) as usize, size)
}

/// Object mask by brightness thresholding against a background constant (8-bit units).
///
/// A pixel belongs to the object when `|255 * brightness - background| >= threshold`;
/// the pixels closer to the background brightness form the complement.
pub fn object_mask(image: &ImagePlane, background_brightness: f64, threshold: f64) -> BinaryMask {
    BinaryMask::from_fn(image.width(), image.height(), |x, y| {
        (255.0 * image.brightness(x, y) - background_brightness).abs() >= threshold
    })
}

/// Median over a `window x window` neighborhood with edge replication.
pub fn median_filter_map(map: &ScalarMap, window: usize) -> Result<ScalarMap> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!("median window must be odd and positive, got {window}")));
    }
    if window == 1 {
        return Ok(map.clone());
    }
    let r = (window / 2) as isize;
    let (w, h) = (map.width as isize, map.height as isize);
    let mid = window * window / 2;
    let mut buf = Vec::with_capacity(window * window);
    let mut out = ScalarMap::zeros(map.width, map.height);
    for y in 0..h {
        for x in 0..w {
            buf.clear();
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, h - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, w - 1) as usize;
                    buf.push(map.get(xx, yy));
                }
            }
            let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
            out.set(x as usize, y as usize, *m);
        }
    }
    Ok(out)
}

/// [`median_filter_map`] for single-channel images.
pub fn median_filter(image: &ImagePlane, window: usize) -> Result<ImagePlane> {
    let map = ScalarMap::from_plane(image)?;
    let out = median_filter_map(&map, window)?;
    Ok(ImagePlane::from_raw_clamped(out.width, out.height, 1, out.data))
}

/// Bilinear resampling with half-pixel centers (`align_corners = false`).
pub fn resize_bilinear(image: &ImagePlane, new_width: usize, new_height: usize) -> Result<ImagePlane> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let xs = axis_weights(image.width(), new_width);
    let ys = axis_weights(image.height(), new_height);
    let ch = image.channels();
    let mut data = Vec::with_capacity(new_width * new_height * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let top = lerp(image.get(x0, y0, c), image.get(x1, y0, c), fx);
                let bottom = lerp(image.get(x0, y1, c), image.get(x1, y1, c), fx);
                data.push(lerp(top, bottom, fy));
            }
        }
    }
    Ok(ImagePlane::from_raw_clamped(new_width, new_height, ch, data))
}

/// Bilinear resampling of an unbounded map, same convention as [`resize_bilinear`].
pub fn resize_map_bilinear(map: &ScalarMap, new_width: usize, new_height: usize) -> Result<ScalarMap> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let xs = axis_weights(map.width, new_width);
    let ys = axis_weights(map.height, new_height);
    let mut data = Vec::with_capacity(new_width * new_height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = lerp(map.get(x0, y0), map.get(x1, y0), fx);
            let bottom = lerp(map.get(x0, y1), map.get(x1, y1), fx);
            data.push(lerp(top, bottom, fy));
        }
    }
    ScalarMap::new(new_width, new_height, data)
}

#[inline]
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear sample at a fractional position with edge replication.
pub(crate) fn sample_bilinear(image: &ImagePlane, x: f64, y: f64, c: usize) -> f64 {
    let xm = (image.width() - 1) as f64;
    let ym = (image.height() - 1) as f64;
    let x = x.clamp(0.0, xm);
    let y = y.clamp(0.0, ym);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(image.width() - 1);
    let y1 = (y0 + 1).min(image.height() - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = lerp(image.get(x0, y0, c), image.get(x1, y0, c), fx);
    let bottom = lerp(image.get(x0, y1, c), image.get(x1, y1, c), fx);
    lerp(top, bottom, fy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, v: &[f64]) -> ImagePlane {
        ImagePlane::new(w, h, 1, v.to_vec()).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(ImagePlane::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(ImagePlane::new(1, 1, 1, vec![1.5]).is_err());
        assert!(ImagePlane::new(1, 1, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn object_mask_uniform_background_is_empty() {
        let img = ImagePlane::filled(4, 4, 3, 200.0 / 255.0);
        assert_eq!(object_mask(&img, 200.0, 60.0).count(), 0);
    }

    #[test]
    fn object_mask_thresholds_distance() {
        let img = gray(2, 2, &[200.0 / 255.0, 200.0 / 255.0, 90.0 / 255.0, 90.0 / 255.0]);
        let m = object_mask(&img, 200.0, 60.0);
        assert_eq!(m.bits(), &[false, false, true, true]);
    }

    #[test]
    fn object_mask_complements_background_rule() {
        let img = ImagePlane::from_fn(9, 7, 3, |x, y, c| ((x * 31 + y * 17 + c * 7) % 256) as f64 / 255.0);
        let obj = object_mask(&img, 200.0, 60.0);
        let background = BinaryMask::from_fn(9, 7, |x, y| (255.0 * img.brightness(x, y) - 200.0).abs() < 60.0);
        assert_eq!(obj, background.complement());
        assert_eq!(obj.intersection_count(&background), 0);
    }

    #[test]
    fn median_window_one_is_identity() {
        let img = gray(3, 2, &[0.1, 0.9, 0.3, 0.4, 0.5, 0.0]);
        assert_eq!(median_filter(&img, 1).unwrap(), img);
    }

    #[test]
    fn median_removes_isolated_spike() {
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let out = median_filter(&gray(3, 3, &v), 3).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn median_rejects_even_or_zero_window() {
        let img = gray(2, 2, &[0.0; 4]);
        assert!(matches!(median_filter(&img, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(median_filter(&img, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn median_of_constant_is_constant() {
        let img = ImagePlane::filled(6, 5, 1, 0.37);
        assert_eq!(median_filter(&img, 5).unwrap(), img);
    }

    #[test]
    fn resize_identity_and_monotone() {
        let img = ImagePlane::from_fn(5, 4, 3, |x, y, c| (x + 2 * y + c) as f64 / 20.0);
        assert_eq!(resize_bilinear(&img, 5, 4).unwrap(), img);

        let row = gray(2, 1, &[0.0, 1.0]);
        let up = resize_bilinear(&row, 4, 1).unwrap();
        assert!(up.data().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(up.data(), &[0.0, 0.25, 0.75, 1.0]);
        assert!(resize_bilinear(&row, 0, 1).is_err());
    }

    #[test]
    fn rect_rasterization_stays_inside() {
        let r = Rect::new(0.0, 1.0, 0.5, 0.5);
        let p = r.to_pixels(10, 10, 1);
        assert_eq!(p, PixelRect { x: 1, y: 4, width: 5, height: 5 });
        let q = Rect::new(0.5, 0.5, 1.0, 1.0).to_pixels(10, 10, 1);
        assert_eq!(q, PixelRect { x: 1, y: 1, width: 8, height: 8 });
        let tiny = Rect::new(0.5, 0.5, 0.001, 0.001).to_pixels(10, 10, 0);
        assert_eq!((tiny.width, tiny.height), (1, 1));
    }

    #[test]
    fn rect_from_pixels_round_trips() {
        let p = PixelRect { x: 3, y: 7, width: 11, height: 4 };
        assert_eq!(Rect::from_pixels(p, 31, 17).to_pixels(31, 17, 0), p);
    }

    #[test]
    fn mask_resize_nearest_preserves_constant() {
        let m = BinaryMask::filled(3, 5, true);
        assert_eq!(m.resize_nearest(7, 2).count(), 14);
    }

    proptest! {
        #[test]
        fn median_preserves_range(vals in proptest::collection::vec(0.0f64..=1.0, 30), win in prop_oneof![Just(1usize), Just(3), Just(5)]) {
            let img = gray(6, 5, &vals);
            let out = median_filter(&img, win).unwrap();
            let (lo, hi) = vals.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn resize_preserves_constants(v in 0.0f64..=1.0, w in 1usize..20, h in 1usize..20) {
            let img = ImagePlane::filled(4, 3, 3, v);
            let out = resize_bilinear(&img, w, h).unwrap();
            prop_assert!(out.data().iter().all(|&s| s == v));
        }

        #[test]
        fn resize_stays_in_unit_range(vals in proptest::collection::vec(0.0f64..=1.0, 12), w in 1usize..16, h in 1usize..16) {
            let img = gray(4, 3, &vals);
            let out = resize_bilinear(&img, w, h).unwrap();
            prop_assert!(out.data().iter().all(|&s| (0.0..=1.0).contains(&s)));
        }

        #[test]
        fn rect_pixels_in_bounds(cx in 0.0f64..=1.0, cy in 0.0f64..=1.0, wf in 0.001f64..=1.0, hf in 0.001f64..=1.0, w in 3usize..300, h in 3usize..300) {
            let p = Rect::new(cx, cy, wf, hf).to_pixels(w, h, 1);
            prop_assert!(p.x >= 1 && p.y >= 1);
            prop_assert!(p.x + p.width <= w - 1 && p.y + p.height <= h - 1);
        }
    }
}
