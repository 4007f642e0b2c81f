//! Per-class hyperparameters and their TOML file format.
//!
//! ```toml
//! name = "bottle"
//! n_max = 3
//! h_min = 0.06
//! h_max = 0.8
//! w_min = 0.06
//! w_max = 0.8
//! s_min = 0.7
//! s_max = 1.3
//! logistic_y0 = 24.0
//! logistic_k = "1/12"
//! gradient_mode = "source"
//!
//! [background]
//! brightness = 200.0
//! t_brightness = 60.0
//! t_object = 0.7
//! t_overlap = 0.25
//! ```
//!
//! A missing `[background]` table disables the object and overlap constraints.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::poisson::GradientMode;
use crate::{Error, Result};

/// Patch outline used for the clone region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeMode {
    #[default]
    Rect,
    /// Union of random ellipses inside the destination rectangle.
    EllipseUnion,
}

/// How patch rectangles are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Truncated-Gamma sizes, object constraints, random rescale.
    #[default]
    Nsa,
    /// Area ratio and aspect ratio drawn uniformly, single patch, no resize.
    CutpasteStyle,
    /// Square patch of side `U(0.1, 0.4)` centered in the core 80%, same location.
    FpiStyle,
}

/// Foreground constraints; present only for classes with a plain background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConstraints {
    /// Background brightness, 8-bit units.
    pub brightness: f64,
    /// Pixels closer than this to `brightness` are background, 8-bit units.
    pub t_brightness: f64,
    pub t_object: f64,
    pub t_overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessMode {
    Object,
    Texture,
    Cxr,
}

/// Resize, rotate, center-crop, random-crop recipe applied before synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSpec {
    pub mode: PreprocessMode,
    pub resize_to: usize,
    /// Maximum absolute rotation in degrees.
    pub rotate_max: f64,
    pub center_crop: usize,
    pub random_crop: usize,
}

impl PreprocessSpec {
    pub fn object(rotate_max: f64) -> Self {
        Self { mode: PreprocessMode::Object, resize_to: 256, rotate_max, center_crop: 230, random_crop: 224 }
    }

    pub fn texture() -> Self {
        Self { mode: PreprocessMode::Texture, resize_to: 264, rotate_max: 0.0, center_crop: 264, random_crop: 256 }
    }

    pub fn cxr() -> Self {
        Self { mode: PreprocessMode::Cxr, resize_to: 256, rotate_max: 3.0, center_crop: 230, random_crop: 224 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    #[serde(default)]
    pub name: String,
    pub n_max: u32,
    pub h_min: f64,
    pub h_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Logistic label midpoint, 8-bit intensity units.
    pub logistic_y0: f64,
    /// Logistic label steepness; accepts a number or a `"1/12"` fraction string.
    #[serde(serialize_with = "ser_steepness", deserialize_with = "de_steepness")]
    pub logistic_k: f64,
    #[serde(default)]
    pub gradient_mode: GradientMode,
    #[serde(default)]
    pub shape_mode: ShapeMode,
    #[serde(default)]
    pub selection_mode: SelectionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundConstraints>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessSpec>,
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            n_max: 3,
            h_min: 0.06,
            h_max: 0.8,
            w_min: 0.06,
            w_max: 0.8,
            s_min: 0.7,
            s_max: 1.3,
            logistic_y0: 15.0,
            logistic_k: 1.0 / 6.0,
            gradient_mode: GradientMode::Source,
            shape_mode: ShapeMode::Rect,
            selection_mode: SelectionMode::Nsa,
            background: None,
            preprocess: None,
        }
    }
}

fn ser_steepness<S: Serializer>(k: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let inv = (1.0 / *k).round();
    if inv >= 2.0 && 1.0 / inv == *k {
        s.serialize_str(&format!("1/{}", inv as u64))
    } else {
        s.serialize_f64(*k)
    }
}

fn de_steepness<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Int(v) => Ok(v as f64),
        Raw::Text(t) => parse_fraction(&t).ok_or_else(|| {
            serde::de::Error::custom(format!("expected a number or a fraction like \"1/12\", got {t:?}"))
        }),
    }
}

fn parse_fraction(text: &str) -> Option<f64> {
    match text.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            (d != 0.0).then(|| n / d)
        }
        None => text.trim().parse().ok(),
    }
}

/// A bound violation anchored to the key that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub key: &'static str,
    pub message: String,
}

impl ClassConfig {
    pub fn constraints_enabled(&self) -> bool {
        self.background.is_some()
    }

    /// Checks every bound; returns all violations rather than the first.
    pub fn violations(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |key, message: String| out.push(Diagnostic { key, message });
        let finite = [
            ("h_min", self.h_min),
            ("h_max", self.h_max),
            ("w_min", self.w_min),
            ("w_max", self.w_max),
            ("s_min", self.s_min),
            ("s_max", self.s_max),
            ("logistic_y0", self.logistic_y0),
            ("logistic_k", self.logistic_k),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                push(key, format!("{key} must be finite"));
            }
        }
        if self.n_max < 1 {
            push("n_max", "n_max must be at least 1".into());
        }
        for (lo_key, lo, hi_key, hi) in [("w_min", self.w_min, "w_max", self.w_max), ("h_min", self.h_min, "h_max", self.h_max)] {
            if !(lo > 0.0) {
                push(lo_key, format!("{lo_key} = {lo} must be > 0"));
            }
            if hi > 1.0 {
                push(hi_key, format!("{hi_key} = {hi} must be <= 1"));
            }
            if lo > hi {
                push(lo_key, format!("{lo_key} = {lo} exceeds {hi_key} = {hi}"));
            }
        }
        if !(self.s_min > 0.0 && self.s_min <= 1.0) {
            push("s_min", format!("s_min = {} must lie in (0, 1]", self.s_min));
        }
        if self.s_max < 1.0 {
            push("s_max", format!("s_max = {} must be >= 1", self.s_max));
        }
        if !(self.logistic_k > 0.0) {
            push("logistic_k", format!("logistic_k = {} must be > 0", self.logistic_k));
        }
        if self.logistic_y0 < 0.0 {
            push("logistic_y0", format!("logistic_y0 = {} must be >= 0", self.logistic_y0));
        }
        if let Some(bg) = &self.background {
            for (key, v, hi) in [
                ("brightness", bg.brightness, 255.0),
                ("t_brightness", bg.t_brightness, 255.0),
                ("t_object", bg.t_object, 1.0),
                ("t_overlap", bg.t_overlap, 1.0),
            ] {
                if !(0.0..=hi).contains(&v) {
                    push(key, format!("{key} = {v} must lie in [0, {hi}]"));
                }
            }
        }
        if let Some(p) = &self.preprocess {
            if p.random_crop == 0 {
                push("random_crop", "random_crop must be positive".into());
            }
            if p.random_crop > p.center_crop {
                push("random_crop", format!("random_crop = {} exceeds center_crop = {}", p.random_crop, p.center_crop));
            }
            if p.center_crop > p.resize_to {
                push("center_crop", format!("center_crop = {} exceeds resize_to = {}", p.center_crop, p.resize_to));
            }
            if !(0.0..=180.0).contains(&p.rotate_max) {
                push("rotate_max", format!("rotate_max = {} must lie in [0, 180]", p.rotate_max));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            return Ok(());
        }
        let mut text = String::new();
        for d in v {
            let _ = writeln!(text, "{}: {}", d.key, d.message);
        }
        Err(Error::Config { path: "<memory>".into(), diagnostics: text })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("class config serializes")
    }

    /// Parses and validates config text; `origin` labels the diagnostics.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ClassConfig = toml::from_str(text).map_err(|e| {
            let anchor = e
                .span()
                .map(|s| {
                    let (line, col) = line_col(text, s.start);
                    format!("{}:{line}:{col}: ", origin.display())
                })
                .unwrap_or_else(|| format!("{}: ", origin.display()));
            Error::Config { path: origin.into(), diagnostics: format!("{anchor}{}", e.message()) }
        })?;
        let violations = cfg.violations();
        if violations.is_empty() {
            return Ok(cfg);
        }
        let mut text_out = String::new();
        for d in violations {
            match key_line(text, d.key) {
                Some(line) => {
                    let _ = writeln!(text_out, "{}:{line}: {}", origin.display(), d.message);
                }
                None => {
                    let _ = writeln!(text_out, "{}: {}", origin.display(), d.message);
                }
            }
        }
        Err(Error::Config { path: origin.into(), diagnostics: text_out.trim_end().to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}
