//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --release --test acceptance` for timings comparable to the budgets.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use common::*;
use nsa_forge::config::{ClassConfig, SelectionMode};
use nsa_forge::imaging::{BinaryMask, ImagePlane, PixelRect, Rect, ScalarMap};
use nsa_forge::labeler::{
    label_binary, label_continuous, label_logistic, raw_binary, raw_continuous, raw_logistic,
};
use nsa_forge::metrics::{au_pro, auroc, bce_loss, mse_loss, Connectivity, ScoredSample, BCE_EPSILON};
use nsa_forge::pipeline::demo::demo;
use nsa_forge::pipeline::io::load_image;
use nsa_forge::pipeline::synth::{blend_pair, prepare_pair};
use nsa_forge::pipeline::{apply_ablations, Ablation, TaskMode};
use nsa_forge::poisson::{
    clone_region, guidance_mixed, guidance_source, seamless_clone, solve_poisson, solve_poisson_raw, CloneOptions,
    GradientMode,
};
use nsa_forge::rng::RngStream;
use nsa_forge::sampler::{
    sample_cutpaste_style, Location, PlacementSampler, CUTPASTE_AREA, CUTPASTE_ASPECT, SIZE_GAMMA_SCALE,
    SIZE_GAMMA_SHAPE,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

fn poisson_oracle() -> Check {
    let start = Instant::now();
    let mut rng = RngStream::new(1001);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let mixed = inst % 2 == 1;
        let channels = if inst % 4 < 2 { 1 } else { 3 };
        let dst = random_image(16, 16, channels, &mut rng);
        let src = random_image(10, 10, channels, &mut rng);
        let (ox, oy) = (rng.below(7) as usize, rng.below(7) as usize);
        let region = clone_region(10, 10, None);
        let field = if mixed {
            let dpatch = dst.crop(PixelRect { x: ox, y: oy, width: 10, height: 10 }).unwrap();
            guidance_mixed(&src, &dpatch, &region).unwrap()
        } else {
            guidance_source(&src, &region).unwrap()
        }
        .placed_at(ox, oy);
        let raw = solve_poisson_raw(&dst, &field, 1e-12, 10_000).unwrap();
        let omega: Vec<(usize, usize)> = (1..9).flat_map(|y| (1..9).map(move |x| (x, y))).collect();
        let oracle: BTreeMap<_, _> = dense_poisson(&dst, &src, &omega, ox, oy, mixed).into_iter().collect();
        ensure(raw.pixels.len() == 64, || format!("instance {inst}: {} unknowns", raw.pixels.len()))?;
        for (i, p) in raw.pixels.iter().enumerate() {
            for c in 0..channels {
                worst = worst.max((raw.values[c][i] - oracle[p][c]).abs());
            }
        }
        let (out, _) = solve_poisson(&dst, &field, 1e-12, 10_000).unwrap();
        let interior = |x: usize, y: usize| x > ox && y > oy && x < ox + 9 && y < oy + 9;
        for y in 0..16 {
            for x in 0..16 {
                if !interior(x, y) {
                    ensure(out.pixel(x, y) == dst.pixel(x, y), || {
                        format!("instance {inst}: exterior pixel ({x}, {y}) changed")
                    })?;
                }
            }
        }
    }
    ensure(worst <= 1e-6, || format!("max |iterative - dense| = {worst:.3e}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("max inf-norm error {worst:.2e}, exterior identical 100/100, {:.2?}", start.elapsed()))
}

fn guidance_identity() -> Check {
    let mut rng = RngStream::new(2002);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (w, h) = (24 + rng.below(24) as usize, 24 + rng.below(24) as usize);
        let img = random_image(w, h, 3, &mut rng);
        let rect = Rect::new(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5));
        let out = seamless_clone(&img, &img, &rect, &rect, GradientMode::Source, None).map_err(|e| e.to_string())?;
        for (a, b) in out.data().iter().zip(img.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-5, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.2e} over 50 images"))
}

fn sampler_audit() -> Check {
    let start = Instant::now();
    let mvtec: Vec<_> = shipped_configs().into_iter().filter(|(n, _)| !n.starts_with("rcxr")).collect();
    ensure(mvtec.len() == 15, || format!("{} MVTec configs", mvtec.len()))?;
    let mut audited = 0;
    let mut exhausted = 0;
    for (name, cfg) in &mvtec {
        let img_s = object_on_background(cfg, 224, 224, 0.0);
        let img_d = object_on_background(cfg, 224, 224, 1.9);
        let sampler = PlacementSampler::new(&img_s, &img_d, cfg, Location::Free).unwrap();
        let root = RngStream::new(3003).derive(audited as u64);
        let (mut accepted, mut draws) = (0, 0u64);
        while accepted < 10_000 {
            draws += 1;
            let p = match sampler.sample_one(&mut root.derive(draws)) {
                Ok(p) => p,
                Err(nsa_forge::Error::PlacementFailure { .. }) => {
                    exhausted += 1;
                    continue;
                }
                Err(e) => return Err(format!("{name}: {e}")),
            };
            accepted += 1;
            let (w, h) = (p.src_rect.width_frac, p.src_rect.height_frac);
            ensure(w >= cfg.w_min && w <= cfg.w_max && h >= cfg.h_min && h <= cfg.h_max, || {
                format!("{name}: size {w}x{h} outside bounds")
            })?;
            ensure(p.scale >= cfg.s_min && p.scale <= cfg.s_max, || format!("{name}: scale {}", p.scale))?;
            if let Some(bg) = cfg.background {
                let (fs, fd, ov) = recount(&img_s, &img_d, &p, bg.brightness, bg.t_brightness);
                ensure(fs > bg.t_object && fd > bg.t_object && ov > bg.t_overlap, || {
                    format!("{name}: recount {fs:.3}/{fd:.3}/{ov:.3} violates constraints")
                })?;
            }
        }
        audited += 1;
    }
    let mut rng = RngStream::new(3004);
    let draws: Vec<f64> = (0..100_000).map(|_| rng.gamma(SIZE_GAMMA_SHAPE, SIZE_GAMMA_SCALE)).collect();
    let ks = ks_distance(draws, |x| gamma2_cdf(x, SIZE_GAMMA_SCALE));
    ensure(ks <= 0.01, || format!("Gamma KS distance {ks:.4}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "15 configs x 10^4 accepted placements all valid ({exhausted} draws exhausted the retry budget), KS {ks:.4}, {:.2?}",
        start.elapsed()
    ))
}

fn multi_patch_law() -> Check {
    let img = ImagePlane::filled(64, 64, 1, 0.5);
    let mut parts = Vec::new();
    for n_max in [1u32, 3, 4] {
        let cfg = ClassConfig { n_max, ..ClassConfig::default() };
        let sampler = PlacementSampler::new(&img, &img, &cfg, Location::Free).unwrap();
        let root = RngStream::new(4004 + n_max as u64);
        let total: usize = (0..100_000u64).map(|i| sampler.sample(&mut root.derive(i)).unwrap().len()).sum();
        let mean = total as f64 / 1e5;
        let expected = 1.0 + (n_max - 1) as f64 / 2.0;
        ensure((mean - expected).abs() <= 0.02, || format!("n_max={n_max}: mean {mean:.4} vs {expected}"))?;
        parts.push(format!("n_max={n_max}: {mean:.4}"));
    }
    Ok(parts.join(", "))
}

fn dilated(rects: &[PixelRect], w: usize, h: usize, by: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        rects.iter().any(|r| x + by >= r.x && x < r.x + r.width + by && y + by >= r.y && y < r.y + r.height + by)
    })
}

fn label_algebra() -> Check {
    let cfg = ClassConfig { logistic_y0: 15.0, logistic_k: 1.0 / 6.0, ..ClassConfig::default() };
    let mut rng = RngStream::new(5005);
    let mut worst_mid: f64 = 0.0;
    for pair in 0..200 {
        let (w, h) = (64, 64);
        let orig = ImagePlane::from_fn(w, h, 3, |x, y, c| {
            0.5 + 0.3 * ((x as f64 * 0.21 + pair as f64).sin() * (y as f64 * 0.17 + c as f64).cos())
        })
        .quantized_u8();
        let src = random_image(w, h, 3, &mut rng).quantized_u8();
        let mut attempt = 0;
        let b = loop {
            attempt += 1;
            let mut r = rng.derive(attempt);
            match blend_pair(&src, &orig, &cfg, TaskMode::NsaBinary, 5, CloneOptions::default(), &mut r) {
                Ok(b) => break b,
                Err(nsa_forge::Error::PlacementFailure { .. }) => continue,
                Err(e) => return Err(e.to_string()),
            }
        };
        let rects: Vec<PixelRect> = b.placements.iter().map(|p| p.dst_pixels(w, h)).collect();
        let blended = b.image;

        for l in [
            label_binary(&orig, &orig, 5).unwrap(),
            label_continuous(&orig, &orig, 5).unwrap(),
            label_logistic(&orig, &orig, cfg.logistic_y0, cfg.logistic_k, 5).unwrap(),
        ] {
            ensure(l.values().iter().all(|&v| v == 0.0), || format!("pair {pair}: nonzero label without anomaly"))?;
        }

        let bin = label_binary(&blended, &orig, 5).unwrap();
        let log = label_logistic(&blended, &orig, cfg.logistic_y0, cfg.logistic_k, 5).unwrap();
        let cont = label_continuous(&blended, &orig, 5).unwrap();
        ensure(log.values().iter().zip(bin.values()).all(|(l, b)| l <= b), || {
            format!("pair {pair}: logistic above binary")
        })?;
        let rb = raw_binary(&blended, &orig).unwrap();
        let rl = raw_logistic(&blended, &orig, cfg.logistic_y0, cfg.logistic_k).unwrap();
        ensure(rl.data.iter().zip(&rb.data).all(|(l, b)| l <= b), || format!("pair {pair}: raw logistic above binary"))?;

        let zone = dilated(&rects, w, h, 2);
        for l in [&bin, &log, &cont] {
            let support = l.support();
            ensure((0..h).all(|y| (0..w).all(|x| !support.get(x, y) || zone.get(x, y))), || {
                format!("pair {pair}: {:?} label outside dilated rects", l.kind)
            })?;
        }

        // a block moved exactly y0 intensity units
        let y0 = cfg.logistic_y0;
        let base = ImagePlane::filled(w, h, 1, 0.2);
        let shifted = ImagePlane::from_fn(w, h, 1, |x, y, _| if (10..20).contains(&x) && (10..20).contains(&y) { 0.2 + y0 / 255.0 } else { 0.2 });
        let cont = raw_continuous(&shifted, &base).unwrap();
        let lg = raw_logistic(&shifted, &base, y0, cfg.logistic_k).unwrap();
        let bn = raw_binary(&shifted, &base).unwrap();
        for i in 0..w * h {
            if bn.data[i] == 1.0 {
                ensure((cont.data[i] - y0).abs() < 1e-9, || format!("constructed continuous {}", cont.data[i]))?;
            }
            worst_mid = worst_mid.max((lg.data[i] - 0.5 * bn.data[i]).abs());
        }
    }
    ensure(worst_mid <= 1e-12, || format!("midpoint error {worst_mid:.3e}"))?;
    Ok(format!("200 pairs: identity exact, logistic <= binary, support within 2 px, midpoint error {worst_mid:.1e}"))
}

fn random_blob_mask(w: usize, h: usize, rng: &mut RngStream) -> Vec<bool> {
    let blobs = 1 + rng.below(4) as usize;
    let mut m = vec![false; w * h];
    for _ in 0..blobs {
        let (bx, by) = (rng.below(w as u64) as usize, rng.below(h as u64) as usize);
        let (bw, bh) = (1 + rng.below(5) as usize, 1 + rng.below(5) as usize);
        for y in by..(by + bh).min(h) {
            for x in bx..(bx + bw).min(w) {
                m[y * w + x] = true;
            }
        }
    }
    m
}

fn metric_oracles() -> Check {
    let mut rng = RngStream::new(6006);
    let mut worst_auc: f64 = 0.0;
    for set in 0..1000 {
        let n = 2 + rng.below(60) as usize;
        let levels = if set % 3 == 0 { 4 } else { 1_000_000 };
        let mut scores: Vec<(f64, bool)> = (0..n).map(|_| (rng.below(levels) as f64 / levels as f64, rng.coin())).collect();
        scores[0].1 = true;
        scores[1].1 = false;
        let got = auroc(&scores).map_err(|e| e.to_string())?;
        worst_auc = worst_auc.max((got - pairwise_auroc(&scores)).abs());
    }
    ensure(worst_auc <= 1e-12, || format!("AUROC error {worst_auc:.3e}"))?;

    let mut worst_pro: f64 = 0.0;
    for inst in 0..100 {
        let mut samples = Vec::new();
        let mut dense = Vec::new();
        for _ in 0..1 + rng.below(3) {
            let (w, h) = (4 + rng.below(17) as usize, 4 + rng.below(17) as usize);
            let truth = random_blob_mask(w, h, &mut rng);
            let levels = if inst % 2 == 0 { 8 } else { 1 << 20 };
            let scores: Vec<f64> = (0..w * h)
                .map(|i| {
                    let bump = if truth[i] { 0.3 } else { 0.0 };
                    ((rng.unit() * 0.7 + bump) * levels as f64).floor() / levels as f64
                })
                .collect();
            samples.push(
                ScoredSample::new(ScalarMap::new(w, h, scores.clone()).unwrap(), BinaryMask::new(w, h, truth.clone()).unwrap())
                    .unwrap(),
            );
            dense.push((scores, truth, w, h));
        }
        if dense.iter().all(|d| d.1.iter().all(|&t| t)) {
            continue;
        }
        for (conn, eight) in [(Connectivity::Eight, true), (Connectivity::Four, false)] {
            let got = au_pro(&samples, 0.3, conn).map_err(|e| e.to_string())?;
            worst_pro = worst_pro.max((got - dense_au_pro(&dense, 0.3, eight)).abs());
        }
    }
    ensure(worst_pro <= 1e-9, || format!("AU-PRO error {worst_pro:.3e}"))?;

    let mut worst_loss: f64 = 0.0;
    for _ in 0..200 {
        let (w, h) = (1 + rng.below(12) as usize, 1 + rng.below(12) as usize);
        let pred: Vec<f64> = (0..w * h).map(|i| if i % 7 == 0 { (i % 2) as f64 } else { rng.unit() }).collect();
        let label: Vec<f64> = (0..w * h).map(|_| rng.unit()).collect();
        let (p, l) = (ScalarMap::new(w, h, pred.clone()).unwrap(), ScalarMap::new(w, h, label.clone()).unwrap());
        let mut bce = 0.0;
        let mut mse = 0.0;
        for i in 0..w * h {
            let q = pred[i].clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            bce -= label[i] * q.ln() + (1.0 - label[i]) * (1.0 - q).ln();
            mse += (pred[i] - label[i]).powi(2);
        }
        let n = (w * h) as f64;
        worst_loss = worst_loss.max((bce_loss(&p, &l).unwrap() - bce / n).abs());
        worst_loss = worst_loss.max((mse_loss(&p, &l).unwrap() - mse / n).abs());
    }
    ensure(worst_loss <= 1e-12, || format!("loss error {worst_loss:.3e}"))?;
    Ok(format!("AUROC {worst_auc:.1e}, AU-PRO {worst_pro:.1e}, BCE/MSE {worst_loss:.1e}"))
}

fn tree_digest(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, format!("{:x}", Sha256::digest(std::fs::read(&path).unwrap())));
            }
        }
    }
    out
}

fn run_synthesize(out: &Path, workers: usize, count: usize, seed: u64) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_nsa-forge"))
        .args(["synthesize", "--config"])
        .arg(fixture("fixture.toml"))
        .arg("--input")
        .arg(fixture("normal"))
        .arg("--output")
        .arg(out)
        .args(["--count", &count.to_string(), "--seed", &seed.to_string(), "--workers", &workers.to_string()])
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("synthesize exited with {status}"))
}

/// Frozen SHA-256 digests of the fixture labels, `relative-path digest` per line.
const LABEL_DIGESTS: &str = "label_digests.txt";

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (one, eight) = (tmp.path().join("w1"), tmp.path().join("w8"));
    run_synthesize(&one, 1, 32, 7)?;
    run_synthesize(&eight, 8, 32, 7)?;
    let (a, b) = (tree_digest(&one), tree_digest(&eight));
    ensure(a.len() > 32 && a == b, || format!("trees differ ({} vs {} files)", a.len(), b.len()))?;

    let labels = tmp.path().join("labels");
    run_synthesize(&labels, 2, 6, 1)?;
    let got: BTreeMap<String, String> =
        tree_digest(&labels).into_iter().filter(|(k, _)| k.starts_with("labels/")).collect();
    let frozen_path = fixture(LABEL_DIGESTS);
    let text = std::fs::read_to_string(&frozen_path).map_err(|e| format!("{}: {e}", frozen_path.display()))?;
    let frozen: BTreeMap<String, String> = text
        .lines()
        .filter_map(|l| l.split_once(' ').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    ensure(got == frozen, || "fixture label digests differ from the checked-in ones".into())?;
    Ok(format!("1 vs 8 workers: {} files identical; {} fixture labels match frozen digests", a.len(), got.len()))
}

fn config_fidelity() -> Check {
    let configs = shipped_configs();
    ensure(configs.len() == 17, || format!("{} shipped configs", configs.len()))?;
    for (name, cfg) in &configs {
        let again = ClassConfig::from_toml_str(&cfg.to_toml(), Path::new(name)).map_err(|e| e.to_string())?;
        ensure(&again == cfg, || format!("{name} does not round-trip"))?;
    }
    let get = |n: &str| configs.iter().find(|(k, _)| k == n).map(|(_, c)| c.clone()).unwrap();
    let bottle = get("bottle");
    ensure(bottle.logistic_y0 == 24.0 && bottle.logistic_k == 1.0 / 12.0, || "bottle logistic".into())?;
    let screw = get("screw");
    ensure(
        screw.n_max == 4
            && (screw.h_min, screw.h_max, screw.w_min, screw.w_max) == (0.06, 0.24, 0.06, 0.24)
            && screw.logistic_y0 == 3.0
            && screw.logistic_k == 1.0,
        || "screw values".into(),
    )?;
    let bg = screw.background.ok_or("screw background missing")?;
    ensure((bg.brightness, bg.t_brightness) == (200.0, 60.0), || "screw background".into())?;
    for t in ["carpet", "grid", "leather", "tile", "wood"] {
        let c = get(t);
        ensure((c.s_min, c.s_max) == (0.5, 2.0), || format!("{t} scale bounds"))?;
    }
    ensure(get("cable").background.is_none(), || "cable constraints".into())?;
    Ok("17 configs round-trip; bottle, screw, texture spot values exact".into())
}

fn ablation_modes() -> Check {
    let img = ImagePlane::filled(224, 224, 3, 0.5);
    let cfg = apply_ablations(&ClassConfig::default(), &[Ablation::C]);
    ensure(cfg.selection_mode == SelectionMode::CutpasteStyle, || "ablation C selection".into())?;
    let sampler = PlacementSampler::new(&img, &img, &cfg, Location::Free).unwrap();
    let mut rng = RngStream::new(9009);
    let tol = 1e-12;
    for _ in 0..100_000 {
        let ps = sampler.sample(&mut rng).map_err(|e| e.to_string())?;
        ensure(ps.len() == 1, || "CutPaste-style produced several patches".into())?;
        let r = ps[0].dst_rect;
        let area = r.width_frac * r.height_frac;
        let aspect = r.width_frac / r.height_frac;
        ensure(
            area > CUTPASTE_AREA.0 - tol && area < CUTPASTE_AREA.1 + tol && aspect > CUTPASTE_ASPECT.0 - tol && aspect < CUTPASTE_ASPECT.1 + tol,
            || format!("area {area}, aspect {aspect}"),
        )?;
    }
    let direct = sample_cutpaste_style(&img, &mut rng).map_err(|e| e.to_string())?;
    ensure(direct.scale == 1.0, || "CutPaste-style rescaled".into())?;

    let src = load_image(&fixture("normal/object_0.png")).map_err(|e| e.to_string())?;
    let dst = load_image(&fixture("normal/object_1.png")).map_err(|e| e.to_string())?;
    let cfg = apply_ablations(&ClassConfig::load(&fixture("fixture.toml")).unwrap(), &[Ablation::D]);
    let (s, d) = prepare_pair(&src, &dst, None, &mut RngStream::new(0)).unwrap();
    let (w, h) = (d.width(), d.height());
    let mut produced = 0;
    let mut i = 0u64;
    while produced < 1000 {
        i += 1;
        let b = match blend_pair(&s, &d, &cfg, TaskMode::NsaBinary, 5, CloneOptions::default(), &mut RngStream::new(i)) {
            Ok(b) => b,
            Err(nsa_forge::Error::PlacementFailure { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let mut allowed = BinaryMask::filled(w, h, false);
        for p in &b.placements {
            let dp = p.dst_pixels(w, h);
            let shape = p.shape_mask.as_ref().ok_or("ablation D placement without a shape")?;
            let region = clone_region(dp.width, dp.height, Some(shape));
            for y in 0..dp.height {
                for x in 0..dp.width {
                    if region.get(x, y) {
                        allowed.set(dp.x + x, dp.y + y, true);
                    }
                }
            }
        }
        let support = raw_binary(&b.image, &d).unwrap().support();
        ensure((0..h).all(|y| (0..w).all(|x| !support.get(x, y) || allowed.get(x, y))), || {
            format!("sample {i}: label support outside the ellipse union")
        })?;
        produced += 1;
    }
    Ok(format!("10^5 CutPaste-style draws in bounds; 1000/1000 ellipse samples confined"))
}

fn demo_smoke() -> Check {
    let imgs: Vec<ImagePlane> =
        (0..3).map(|i| load_image(&fixture(&format!("normal/object_{i}.png"))).unwrap()).collect();
    let cfg = ClassConfig::load(&fixture("fixture.toml")).unwrap();
    let (mut cut, mut nsa) = (0.0, 0.0);
    let runs = 60;
    for seed in 0..runs as u64 {
        let (i, j) = ((seed % 3) as usize, ((seed + 1) % 3) as usize);
        let out = demo(&imgs[i], &imgs[j], &cfg, seed).map_err(|e| e.to_string())?;
        ensure(out.panels.iter().all(|p| p.exterior_identical), || format!("seed {seed}: exterior changed"))?;
        cut += out.panel(TaskMode::Cutpaste).unwrap().edge;
        nsa += out.panel(TaskMode::NsaLogistic).unwrap().edge;
    }
    let ratio = cut / nsa;
    ensure(ratio > 3.0, || format!("CutPaste/NSA boundary gradient ratio {ratio:.2}"))?;
    Ok(format!(
        "exterior identical in all panels; mean seam gradient CutPaste {:.4} vs NSA {:.4} (ratio {ratio:.2})",
        cut / runs as f64,
        nsa / runs as f64
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("poisson solver matches dense oracle", poisson_oracle),
        ("self-clone reproduces destination", guidance_identity),
        ("sampler constraint audit", sampler_audit),
        ("multi-patch count law", multi_patch_law),
        ("label algebra", label_algebra),
        ("metric oracles", metric_oracles),
        ("determinism", determinism),
        ("config fidelity", config_fidelity),
        ("ablation modes", ablation_modes),
        ("demo edge statistics", demo_smoke),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
