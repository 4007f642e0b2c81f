//! Detection and localization scores for anomaly maps.
//!
//! Conventions, fixed so curves are bit-reproducible:
//! - a pixel or image is predicted positive when its score is `>= t`;
//! - ROC and PRO curves are evaluated at every distinct score, starting from `(0, 0)`;
//! - AUROC counts ties as one half (Mann–Whitney);
//! - AU-PRO integrates PRO over FPR with the trapezoid rule, linearly
//!   interpolating the segment that crosses the FPR limit, then divides by the limit.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::imaging::{resize_map_bilinear, BinaryMask, ScalarMap};
use crate::{Error, Result};

pub const BCE_EPSILON: f64 = 1e-7;
pub const DEFAULT_FPR_LIMIT: f64 = 0.3;
/// Upper bound on the number of points kept per curve in a report.
pub const MAX_CURVE_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

/// A predicted anomaly map with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub prediction: ScalarMap,
    pub truth_mask: BinaryMask,
}

impl ScoredSample {
    pub fn new(prediction: ScalarMap, truth_mask: BinaryMask) -> Result<Self> {
        if prediction.width != truth_mask.width() || prediction.height != truth_mask.height() {
            return Err(Error::dims(format!(
                "prediction {}x{} vs mask {}x{}",
                prediction.width,
                prediction.height,
                truth_mask.width(),
                truth_mask.height()
            )));
        }
        Ok(Self { prediction, truth_mask })
    }

    pub fn is_anomalous(&self) -> bool {
        self.truth_mask.count() > 0
    }
}

/// Mean pixel score.
pub fn image_score(prediction: &ScalarMap) -> Result<f64> {
    if prediction.data.is_empty() {
        return Err(Error::invalid("empty prediction map"));
    }
    Ok(prediction.data.iter().sum::<f64>() / prediction.data.len() as f64)
}

fn sort_desc(scores: &mut [(f64, bool)]) {
    scores.sort_by(|a, b| b.0.total_cmp(&a.0));
}

/// Area under the ROC curve as the Mann–Whitney statistic,
/// `P(pos > neg) + P(pos = neg) / 2`.
pub fn auroc(scores: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scores.iter().filter(|s| s.1).count() as u128;
    let n_neg = scores.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUROC needs both classes ({n_pos} positives, {n_neg} negatives)"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // twice the U statistic, kept integral
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut p, mut q) = (0u128, 0u128);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        twice_u += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// `(fpr, tpr)` at every distinct threshold, descending, starting at `(0, 0)`.
pub fn roc_curve(scores: &[(f64, bool)]) -> Result<Vec<(f64, f64)>> {
    let n_pos = scores.iter().filter(|s| s.1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("ROC curve needs both classes".into()));
    }
    let mut sorted = scores.to_vec();
    sort_desc(&mut sorted);
    let mut out = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(out)
}

fn pooled_pixels(samples: &[ScoredSample]) -> Vec<(f64, bool)> {
    samples
        .iter()
        .flat_map(|s| s.prediction.data.iter().copied().zip(s.truth_mask.bits().iter().copied()))
        .collect()
}

/// AUROC over every pixel of every sample.
pub fn pixel_auroc(samples: &[ScoredSample]) -> Result<f64> {
    auroc(&pooled_pixels(samples))
}

/// AUROC of mean-pixel image scores against "mask has any set pixel".
pub fn image_auroc(samples: &[ScoredSample]) -> Result<f64> {
    auroc(&image_scores(samples)?)
}

fn image_scores(samples: &[ScoredSample]) -> Result<Vec<(f64, bool)>> {
    samples.iter().map(|s| Ok((image_score(&s.prediction)?, s.is_anomalous()))).collect()
}

/// Connected components of set pixels. Returns per-pixel labels (0 = unset,
/// components numbered from 1 in raster order of their first pixel) and the count.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, next as usize)
}

/// Area under a monotone curve up to `limit`, divided by `limit`.
pub fn normalized_partial_area(points: &[(f64, f64)], limit: f64) -> f64 {
    let mut area = 0.0;
    for seg in points.windows(2) {
        let ((f0, p0), (f1, p1)) = (seg[0], seg[1]);
        if f0 >= limit {
            break;
        }
        if f1 <= limit {
            area += (f1 - f0) * (p0 + p1) / 2.0;
        } else {
            let p_lim = p0 + (p1 - p0) * (limit - f0) / (f1 - f0);
            area += (limit - f0) * (p0 + p_lim) / 2.0;
            break;
        }
    }
    area / limit
}

/// PRO curve points `(fpr, pro)` at every distinct threshold, starting at `(0, 0)`.
pub fn pro_curve(samples: &[ScoredSample], connectivity: Connectivity) -> Result<Vec<(f64, f64)>> {
    // Per pixel: component id (global, 1-based) or 0 for a normal pixel.
    let mut pixels: Vec<(f64, usize)> = Vec::new();
    let mut sizes: Vec<usize> = vec![0];
    for s in samples {
        let (labels, count) = connected_components(&s.truth_mask, connectivity);
        let base = sizes.len() - 1;
        sizes.resize(base + count + 1, 0);
        for (&score, &l) in s.prediction.data.iter().zip(&labels) {
            let id = if l == 0 { 0 } else { base + l as usize };
            sizes[id] += 1;
            pixels.push((score, id));
        }
    }
    let components = sizes.len() - 1;
    let negatives = sizes[0];
    if components == 0 {
        return Err(Error::UndefinedMetric("AU-PRO needs at least one anomalous region".into()));
    }
    if negatives == 0 {
        return Err(Error::UndefinedMetric("AU-PRO needs at least one normal pixel".into()));
    }
    pixels.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut covered = vec![0usize; sizes.len()];
    let mut out = vec![(0.0, 0.0)];
    let mut pro_sum = 0.0;
    let mut i = 0;
    while i < pixels.len() {
        let t = pixels[i].0;
        while i < pixels.len() && pixels[i].0 == t {
            let id = pixels[i].1;
            covered[id] += 1;
            if id != 0 {
                pro_sum += 1.0 / sizes[id] as f64;
            }
            i += 1;
        }
        out.push((covered[0] as f64 / negatives as f64, pro_sum / components as f64));
    }
    Ok(out)
}

/// Normalized area under the PRO curve for FPR in `[0, fpr_limit]`.
pub fn au_pro(samples: &[ScoredSample], fpr_limit: f64, connectivity: Connectivity) -> Result<f64> {
    if !(fpr_limit > 0.0 && fpr_limit <= 1.0) {
        return Err(Error::invalid(format!("fpr limit {fpr_limit} outside (0, 1]")));
    }
    Ok(normalized_partial_area(&pro_curve(samples, connectivity)?, fpr_limit))
}

/// Binary cross-entropy averaged over pixels, predictions clipped to `[ε, 1 - ε]`.
pub fn bce_loss(prediction: &ScalarMap, label: &ScalarMap) -> Result<f64> {
    check_maps(prediction, label)?;
    let n = prediction.data.len() as f64;
    let total: f64 = prediction
        .data
        .iter()
        .zip(&label.data)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
        })
        .sum();
    Ok(total / n)
}

pub fn mse_loss(prediction: &ScalarMap, label: &ScalarMap) -> Result<f64> {
    check_maps(prediction, label)?;
    let n = prediction.data.len() as f64;
    Ok(prediction.data.iter().zip(&label.data).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n)
}

fn check_maps(a: &ScalarMap, b: &ScalarMap) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::dims(format!("{}x{} vs {}x{}", a.width, a.height, b.width, b.height)));
    }
    if a.data.is_empty() {
        return Err(Error::invalid("empty map"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub fpr_limit: f64,
    pub connectivity: Connectivity,
    /// Resample to 256x256 (nearest masks, bilinear predictions) before AU-PRO.
    pub resample_256: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { fpr_limit: DEFAULT_FPR_LIMIT, connectivity: Connectivity::Eight, resample_256: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    /// `None` when every image has the same ground-truth class.
    pub image_auroc: Option<f64>,
    pub pixel_auroc: f64,
    pub au_pro: f64,
    pub fpr_limit: f64,
    pub samples: usize,
    pub image_roc_points: Vec<(f64, f64)>,
    pub roc_points: Vec<(f64, f64)>,
    pub pro_points: Vec<(f64, f64)>,
}

/// Keeps at most `max` points, always including both endpoints.
pub fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 2 {
        return points.to_vec();
    }
    let last = points.len() - 1;
    (0..max).map(|k| points[k * last / (max - 1)]).collect()
}

pub fn resample_256(sample: &ScoredSample) -> Result<ScoredSample> {
    let prediction = resize_map_bilinear(&sample.prediction, 256, 256)?;
    ScoredSample::new(prediction, sample.truth_mask.resize_nearest(256, 256))
}

/// All three scores plus their curves.
pub fn score(samples: &[ScoredSample], opts: EvalOptions) -> Result<ScoreReport> {
    let pixels = pooled_pixels(samples);
    let pixel_auroc = auroc(&pixels)?;
    let roc_points = decimate(&roc_curve(&pixels)?, MAX_CURVE_POINTS);
    let images = image_scores(samples)?;
    let (image_auroc, image_roc_points) = match auroc(&images) {
        Ok(v) => (Some(v), roc_curve(&images)?),
        Err(Error::UndefinedMetric(_)) => (None, Vec::new()),
        Err(e) => return Err(e),
    };
    let resampled;
    let pro_samples = if opts.resample_256 {
        resampled = samples.iter().map(resample_256).collect::<Result<Vec<_>>>()?;
        &resampled[..]
    } else {
        samples
    };
    let pro = pro_curve(pro_samples, opts.connectivity)?;
    if !(opts.fpr_limit > 0.0 && opts.fpr_limit <= 1.0) {
        return Err(Error::invalid(format!("fpr limit {} outside (0, 1]", opts.fpr_limit)));
    }
    let au_pro = normalized_partial_area(&pro, opts.fpr_limit);
    Ok(ScoreReport {
        image_auroc,
        pixel_auroc,
        au_pro,
        fpr_limit: opts.fpr_limit,
        samples: samples.len(),
        image_roc_points: decimate(&image_roc_points, MAX_CURVE_POINTS),
        roc_points,
        pro_points: decimate(&pro, MAX_CURVE_POINTS),
    })
}
