//! Brute-force reference implementations shared by the integration and acceptance tests.
//! Each one is written from the definition, without calling the code it checks.

#![allow(dead_code)]

use nsa_forge::config::ClassConfig;
use nsa_forge::imaging::{ImagePlane, Rect};
use nsa_forge::rng::RngStream;
use nsa_forge::sampler::PatchPlacement;

pub fn random_image(w: usize, h: usize, c: usize, rng: &mut RngStream) -> ImagePlane {
    let data = (0..w * h * c).map(|_| rng.unit()).collect();
    ImagePlane::new(w, h, c, data).unwrap()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Dense solve of `4 f_p - sum_{q in N_p, q in Ω} f_q = sum_{q in N_p, q not in Ω} f*_q + sum v_pq`
/// for a grid of `src` placed at `(ox, oy)` in `dst`, with Ω given as grid coordinates.
/// Returns `((x, y) in dst, value per channel)` for every pixel of Ω.
pub fn dense_poisson(
    dst: &ImagePlane,
    src: &ImagePlane,
    omega: &[(usize, usize)],
    ox: usize,
    oy: usize,
    mixed: bool,
) -> Vec<((usize, usize), Vec<f64>)> {
    let n = omega.len();
    let index = |x: usize, y: usize| omega.iter().position(|&p| p == (x, y));
    let mut solutions = vec![vec![0.0; dst.channels()]; n];
    for c in 0..dst.channels() {
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (i, &(x, y)) in omega.iter().enumerate() {
            a[i][i] = 4.0;
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (qx, qy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                let gs = src.get(x, y, c) - src.get(qx, qy, c);
                let gd = dst.get(ox + x, oy + y, c) - dst.get(ox + qx, oy + qy, c);
                b[i] += if mixed && gd.abs() > gs.abs() { gd } else { gs };
                match index(qx, qy) {
                    Some(j) => a[i][j] -= 1.0,
                    None => b[i] += dst.get(ox + qx, oy + qy, c),
                }
            }
        }
        for (i, v) in gauss_solve(a, b).into_iter().enumerate() {
            solutions[i][c] = v;
        }
    }
    omega.iter().map(|&(x, y)| (ox + x, oy + y)).zip(solutions).collect()
}

/// Pixel rasterization of a fractional rectangle, 1-px margin.
pub fn raster(r: &Rect, w: usize, h: usize) -> (usize, usize, usize, usize) {
    let axis = |c: f64, f: f64, d: usize| {
        let size = ((f * d as f64).round().max(1.0) as usize).min(d - 2);
        let start = (c * d as f64 - size as f64 / 2.0).round();
        (start.clamp(1.0, (d - size - 1) as f64) as usize, size)
    };
    let (x, pw) = axis(r.center_x, r.width_frac, w);
    let (y, ph) = axis(r.center_y, r.height_frac, h);
    (x, y, pw, ph)
}

pub fn is_object(img: &ImagePlane, x: usize, y: usize, b: f64, t: f64) -> bool {
    let mean = (0..img.channels()).map(|c| img.get(x, y, c)).sum::<f64>() / img.channels() as f64;
    (mean * 255.0 - b).abs() >= t
}

/// Recomputed `(source object fraction, destination object fraction, overlap fraction)`.
pub fn recount(img_s: &ImagePlane, img_d: &ImagePlane, p: &PatchPlacement, b: f64, t: f64) -> (f64, f64, f64) {
    let (w, h) = (img_s.width(), img_s.height());
    let (sx, sy, sw, sh) = raster(&p.src_rect, w, h);
    let (dx, dy, dw, dh) = raster(&p.dst_rect, w, h);
    let mut src_obj = 0;
    for y in sy..sy + sh {
        for x in sx..sx + sw {
            src_obj += is_object(img_s, x, y, b, t) as usize;
        }
    }
    let (mut dst_obj, mut moved, mut hit) = (0, 0, 0);
    for j in 0..dh {
        for i in 0..dw {
            let d = is_object(img_d, dx + i, dy + j, b, t);
            dst_obj += d as usize;
            let u = (((i as f64 + 0.5) * sw as f64 / dw as f64) as usize).min(sw - 1);
            let v = (((j as f64 + 0.5) * sh as f64 / dh as f64) as usize).min(sh - 1);
            if is_object(img_s, sx + u, sy + v, b, t) {
                moved += 1;
                hit += d as usize;
            }
        }
    }
    let overlap = if moved == 0 { 0.0 } else { hit as f64 / moved as f64 };
    (src_obj as f64 / (sw * sh) as f64, dst_obj as f64 / (dw * dh) as f64, overlap)
}

/// An object of brightness far from `cfg`'s background, on that background.
pub fn object_on_background(cfg: &ClassConfig, w: usize, h: usize, phase: f64) -> ImagePlane {
    let (b, t) = cfg.background.map_or((200.0, 60.0), |bg| (bg.brightness, bg.t_brightness));
    let obj = if b >= 128.0 { (b - t - 40.0).max(0.0) } else { (b + t + 40.0).min(255.0) };
    ImagePlane::from_fn(w, h, 3, |x, y, c| {
        let (u, v) = (x as f64 / w as f64 - 0.5, y as f64 / h as f64 - 0.5);
        let inside = (u / 0.46).powi(2) + (v / 0.43).powi(2) <= 1.0;
        let base = if inside { obj + 12.0 * (x as f64 * 0.3 + phase + c as f64).sin() } else { b };
        base.clamp(0.0, 255.0).round() / 255.0
    })
}

pub fn pairwise_auroc(scores: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut total = 0.0;
    for p in &pos {
        for q in &neg {
            total += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (pos.len() * neg.len()) as f64
}

/// Component labels by repeated relaxation to the minimum neighbor label.
pub fn relaxed_components(mask: &[bool], w: usize, h: usize, eight: bool) -> Vec<usize> {
    let mut lab: Vec<usize> = (0..w * h).map(|i| if mask[i] { i + 1 } else { 0 }).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if lab[i] == 0 {
                    continue;
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if lab[j] != 0 && lab[j] < lab[i] {
                            lab[i] = lab[j];
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return lab;
        }
    }
}

/// A sample as `(scores, truth, width, height)`.
pub type Dense = (Vec<f64>, Vec<bool>, usize, usize);

/// PRO curve from a full threshold sweep, then the trapezoid area up to `limit` over `limit`.
pub fn dense_au_pro(samples: &[Dense], limit: f64, eight: bool) -> f64 {
    let mut regions: Vec<Vec<f64>> = Vec::new();
    let mut normals: Vec<f64> = Vec::new();
    for (scores, truth, w, h) in samples {
        let lab = relaxed_components(truth, *w, *h, eight);
        let mut ids: Vec<usize> = lab.iter().copied().filter(|&l| l != 0).collect();
        ids.sort();
        ids.dedup();
        for id in ids {
            regions.push((0..scores.len()).filter(|&i| lab[i] == id).map(|i| scores[i]).collect());
        }
        normals.extend((0..scores.len()).filter(|&i| !truth[i]).map(|i| scores[i]));
    }
    let mut thresholds: Vec<f64> = samples.iter().flat_map(|s| s.0.iter().copied()).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut curve = vec![(0.0, 0.0)];
    for t in thresholds {
        let fpr = normals.iter().filter(|&&v| v >= t).count() as f64 / normals.len() as f64;
        let pro = regions
            .iter()
            .map(|r| r.iter().filter(|&&v| v >= t).count() as f64 / r.len() as f64)
            .sum::<f64>()
            / regions.len() as f64;
        curve.push((fpr, pro));
    }
    let mut area = 0.0;
    for s in curve.windows(2) {
        let ((f0, p0), (f1, p1)) = (s[0], s[1]);
        if f0 >= limit {
            break;
        }
        if f1 <= limit {
            area += (f1 - f0) * (p0 + p1) / 2.0;
        } else {
            let pl = p0 + (p1 - p0) * (limit - f0) / (f1 - f0);
            area += (limit - f0) * (p0 + pl) / 2.0;
            break;
        }
    }
    area / limit
}

/// CDF of Gamma(shape 2, scale θ).
pub fn gamma2_cdf(x: f64, theta: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x / theta).exp() * (1.0 + x / theta)
    }
}

/// Kolmogorov–Smirnov distance of `draws` against `cdf`.
pub fn ks_distance(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn shipped_configs() -> Vec<(String, ClassConfig)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut paths: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), ClassConfig::load(&p).unwrap()))
        .collect()
}

pub fn fixture(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}
