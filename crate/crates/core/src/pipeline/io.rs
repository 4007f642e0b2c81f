//! PNG encoding of images, labels, predictions and masks.
//!
//! - blended images: 8-bit gray or RGB, `round(v * 255)`;
//! - bounded labels: 16-bit gray, `round(v * 65535)`;
//! - continuous labels (8-bit intensity units): 16-bit gray, `round(v * 256)`, saturating.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::imaging::{BinaryMask, ImagePlane, ScalarMap};
use crate::labeler::{LabelKind, LabelMap};
use crate::{Error, Result};

fn codec(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image { path: path.to_path_buf(), source }
}

pub fn load_image(path: &Path) -> Result<ImagePlane> {
    let img = image::open(path).map_err(codec(path))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = match img {
        DynamicImage::ImageLuma8(b) => ImagePlane::new(w, h, 1, b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => ImagePlane::new(w, h, 1, b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()),
        DynamicImage::ImageLumaA8(_) => {
            let b = img.to_luma8();
            ImagePlane::new(w, h, 1, b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLumaA16(_) => {
            let b = img.to_luma16();
            ImagePlane::new(w, h, 1, b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            let b = img.to_rgb16();
            ImagePlane::new(w, h, 3, b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        _ => {
            let b = img.to_rgb8();
            ImagePlane::new(w, h, 3, b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
    };
    plane.map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn save_image(path: &Path, image: &ImagePlane) -> Result<()> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let raw: Vec<u8> = image.data().iter().map(|&v| to_u8(v)).collect();
    let res = if image.channels() == 1 {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer size").save_with_format(path, ImageFormat::Png)
    } else {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("buffer size").save_with_format(path, ImageFormat::Png)
    };
    res.map_err(codec(path))
}

/// 16-bit code of one label value.
pub fn encode_label_value(v: f64, kind: LabelKind) -> u16 {
    let scaled = if kind.is_bounded() { v * 65535.0 } else { v * 256.0 };
    scaled.round().clamp(0.0, 65535.0) as u16
}

pub fn decode_label_value(code: u16, kind: LabelKind) -> f64 {
    if kind.is_bounded() {
        code as f64 / 65535.0
    } else {
        code as f64 / 256.0
    }
}

pub fn save_label(path: &Path, label: &LabelMap) -> Result<()> {
    let raw: Vec<u16> = label.values().iter().map(|&v| encode_label_value(v, label.kind)).collect();
    save_u16(path, label.width(), label.height(), raw)
}

fn save_u16(path: &Path, w: usize, h: usize, raw: Vec<u16>) -> Result<()> {
    ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, raw)
        .expect("buffer size")
        .save_with_format(path, ImageFormat::Png)
        .map_err(codec(path))
}

pub fn load_label(path: &Path, kind: LabelKind) -> Result<LabelMap> {
    let img = image::open(path).map_err(codec(path))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|c| decode_label_value(c, kind)).collect();
    Ok(LabelMap { map: ScalarMap::new(w, h, data)?, kind })
}

/// Prediction map from an 8- or 16-bit gray PNG, scaled to `[0, 1]`.
pub fn load_prediction(path: &Path) -> Result<ScalarMap> {
    let img = image::open(path).map_err(codec(path))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        other => other.to_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    ScalarMap::new(w, h, data)
}

pub fn save_prediction(path: &Path, map: &ScalarMap) -> Result<()> {
    let raw = map.data.iter().map(|&v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16).collect();
    save_u16(path, map.width, map.height, raw)
}

/// Any nonzero pixel is anomalous.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path).map_err(codec(path))?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    BinaryMask::new(w, h, img.into_raw().into_iter().map(|v| v != 0).collect())
}

pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let raw: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    ImageBuffer::<Luma<u8>, _>::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer size")
        .save_with_format(path, ImageFormat::Png)
        .map_err(codec(path))
}

/// PNG files directly inside `dir`, sorted by file name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
