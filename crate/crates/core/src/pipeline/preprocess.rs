use crate::config::PreprocessSpec;
use crate::imaging::{resize_bilinear, sample_bilinear, ImagePlane, PixelRect};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Rotation about the image center by `degrees`, bilinear with edge replication.
pub fn rotate(image: &ImagePlane, degrees: f64) -> ImagePlane {
    if degrees == 0.0 {
        return image.clone();
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (image.width() - 1) as f64 / 2.0;
    let cy = (image.height() - 1) as f64 / 2.0;
    ImagePlane::from_fn(image.width(), image.height(), image.channels(), |x, y, c| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = cos * dx + sin * dy + cx;
        let sy = -sin * dx + cos * dy + cy;
        sample_bilinear(image, sx, sy, c)
    })
}

/// Random parameters of one preprocessing pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessDraw {
    pub angle: f64,
    pub crop_x: usize,
    pub crop_y: usize,
}

fn check(spec: &PreprocessSpec) -> Result<()> {
    if spec.random_crop == 0 || spec.random_crop > spec.center_crop || spec.center_crop > spec.resize_to {
        return Err(Error::invalid(format!(
            "crop sizes must satisfy 0 < {} <= {} <= {}",
            spec.random_crop, spec.center_crop, spec.resize_to
        )));
    }
    Ok(())
}

pub fn draw(spec: &PreprocessSpec, rng: &mut RngStream) -> Result<PreprocessDraw> {
    check(spec)?;
    let angle = rng.uniform(-spec.rotate_max, spec.rotate_max);
    let slack = (spec.center_crop - spec.random_crop) as u64 + 1;
    let crop_x = rng.below(slack) as usize;
    let crop_y = rng.below(slack) as usize;
    Ok(PreprocessDraw { angle, crop_x, crop_y })
}

/// Resize, rotation, center crop, then the drawn crop.
pub fn apply(image: &ImagePlane, spec: &PreprocessSpec, d: PreprocessDraw) -> Result<ImagePlane> {
    check(spec)?;
    let resized = resize_bilinear(image, spec.resize_to, spec.resize_to)?;
    let rotated = rotate(&resized, d.angle);
    let off = (spec.resize_to - spec.center_crop) / 2;
    let centered = rotated.crop(PixelRect { x: off, y: off, width: spec.center_crop, height: spec.center_crop })?;
    centered.crop(PixelRect { x: d.crop_x, y: d.crop_y, width: spec.random_crop, height: spec.random_crop })
}

/// Resize, random rotation, center crop, then uniform random crop.
pub fn preprocess(image: &ImagePlane, spec: &PreprocessSpec, rng: &mut RngStream) -> Result<ImagePlane> {
    let d = draw(spec, rng)?;
    apply(image, spec, d)
}
