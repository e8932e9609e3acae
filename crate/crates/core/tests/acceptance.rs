//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.
//!
//! cargo test -p depthkit --test acceptance -- --nocapture

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{chacha, max_abs_diff, oracle, random_labels, random_map, test_rng};
use depthkit::affine::{apply_affine, fit_global, fit_segmentwise, AffineModel};
use depthkit::bench::{mean_rmse, run_bench, BenchSpec, Method};
use depthkit::depth::{normalize, normalize_field, sample_sparse, segment_stats};
use depthkit::io::{decode_depth, decode_gray, decode_segments, encode_depth, encode_gray, encode_segments, DepthFormat};
use depthkit::losses::{loss_breakdown, masked_mse_loss, mse_gradient, mse_loss, ssim_map, LossConfig, SsimConfig};
use depthkit::metrics::{evaluate, evaluate_many, silog, silog_segment, Aggregation, DEFAULT_TAUS, PRED_FLOOR};
use depthkit::scene::{generate_scene, DistortionKind, SceneSpec};
use depthkit::synth::{fill_gaps, fill_pass, generate_pair, plan_rescale, rescale, AlphaMode, BetaMode, NoiseLevel, PairConfig};
use depthkit::{DepthMap, Error, GrayImage, SegmentMap, SparseDepth};
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> std::result::Result<(), String> {
    check((got - want).abs() <= tol, || format!("{name}: got {got:e}, oracle {want:e}, |diff| > {tol:e}"))
}

// 1 ------------------------------------------------------------------------

fn oracle_instance(seed: u64) -> std::result::Result<(), String> {
    let mut rng = test_rng(seed);
    let w = rng.random_range(3..=32);
    let h = rng.random_range(3..=32);
    let n = w * h;
    let tol = 1e-9;

    // metrics
    let gt = random_map(&mut rng, w, h, 0.5, 20.0, 0.2);
    let pred = random_map(&mut rng, w, h, 0.0005, 25.0, 0.0);
    if gt.valid_count() == 0 {
        return Ok(());
    }
    let k = rng.random_range(1..=6);
    let labels = random_labels(&mut rng, n, k, 0.1);
    let seg = SegmentMap::new(w, h, labels.clone()).unwrap();
    let rep = evaluate(&pred, &gt, &DEFAULT_TAUS, None).unwrap();
    let want = oracle::metrics(pred.data(), gt.data(), &DEFAULT_TAUS);
    close("rmse", rep.rmse, want.rmse, tol)?;
    close("mae", rep.mae, want.mae, tol)?;
    close("irmse", rep.irmse, want.irmse, 1e-9 * want.irmse.max(1.0))?;
    close("imae", rep.imae, want.imae, 1e-9 * want.imae.max(1.0))?;
    close("silog", rep.silog, want.silog, tol)?;
    close("silog fn", silog(&pred, &gt).unwrap(), want.silog, tol)?;
    close("rel", rep.rel, want.rel, tol)?;
    for ((_, got), want) in rep.delta.iter().zip(&want.delta) {
        close("delta", *got, *want, tol)?;
    }
    match (silog_segment(&pred, &gt, &seg), oracle::silog_segment(pred.data(), gt.data(), &labels)) {
        (Ok(got), Some(want)) => close("silog_segment", got, want, tol)?,
        (Err(Error::NoQualifyingSegment), None) => {}
        (got, want) => return Err(format!("silog_segment: {got:?} vs oracle {want:?}")),
    }

    // pooled aggregation against a concatenated oracle
    let gt2 = random_map(&mut rng, w, h, 0.5, 20.0, 0.2);
    if gt2.valid_count() > 0 {
        let pooled = evaluate_many(&[(&pred, &gt, None), (&pred, &gt2, None)], &DEFAULT_TAUS, Aggregation::Pooled).unwrap();
        let cat_p: Vec<f64> = pred.data().iter().chain(pred.data()).copied().collect();
        let cat_g: Vec<f64> = gt.data().iter().chain(gt2.data()).copied().collect();
        let want = oracle::metrics(&cat_p, &cat_g, &DEFAULT_TAUS);
        close("pooled rmse", pooled.rmse, want.rmse, tol)?;
        close("pooled silog", pooled.silog, want.silog, tol)?;
    }

    // losses
    let target = random_map(&mut rng, w, h, 0.5, 20.0, 0.15);
    close("mse", mse_loss(&pred, &target).unwrap(), oracle::mse(pred.data(), target.data()), tol)?;
    if target.valid_count() > 0 {
        let (p, t): (Vec<f64>, Vec<f64>) = pred
            .data()
            .iter()
            .zip(target.data())
            .filter(|(_, t)| **t > 0.0)
            .map(|(a, b)| (*a, *b))
            .unzip();
        close("masked mse", masked_mse_loss(&pred, &target).unwrap(), oracle::mse(&p, &t), tol)?;
    }
    let win = [3usize, 5, 7, 11].into_iter().filter(|&s| s <= w.min(h)).max().unwrap();
    let scfg = SsimConfig {
        window: win,
        ..SsimConfig::default()
    };
    let (np, nt) = oracle::normalize_pair(pred.data(), target.data());
    let got = ssim_map(&DepthMap::new(w, h, np.clone()).unwrap(), &DepthMap::new(w, h, nt.clone()).unwrap(), &scfg).unwrap();
    let want = oracle::ssim_map(&np, &nt, w, h, win, scfg.c1(), scfg.c2());
    check(max_abs_diff(&got, &want) <= tol, || format!("ssim map differs by {:e}", max_abs_diff(&got, &want)))?;
    let lambda = rng.random_range(0.0..5.0);
    let lb = loss_breakdown(&pred, &target, &LossConfig { lambda }, &scfg).unwrap();
    close("total loss", lb.total, oracle::total_loss(pred.data(), target.data(), w, h, lambda, win), tol)?;

    // normalization and statistics
    let rel = random_map(&mut rng, w, h, 0.1, 10.0, 0.05);
    if rel.valid_count() > 0 {
        let got = normalize(&rel).unwrap();
        check(max_abs_diff(got.data(), &oracle::normalize(rel.data())) <= tol, || "normalize".into())?;
        let field = normalize_field(&rel).unwrap();
        check(max_abs_diff(&field.values, got.data()) == 0.0, || "normalize_field".into())?;
    }
    let stats = segment_stats(&rel, &seg).unwrap();
    let want = oracle::segment_stats(rel.data(), &labels);
    check(stats.len() == want.len(), || "segment_stats count".into())?;
    for (s, (label, count, mean, lo, hi)) in stats.iter().zip(&want) {
        check(s.label == *label && s.pixel_count == *count && s.min == *lo && s.max == *hi, || {
            format!("segment_stats {s:?}")
        })?;
        close("segment mean", s.mean, *mean, tol)?;
    }

    // gap fill, one pass and to convergence
    let hole_frac = rng.random_range(0.05..0.9);
    let holes = random_map(&mut rng, w, h, 0.5, 20.0, hole_frac);
    let (one, _) = fill_pass(&holes);
    let want = oracle::fill_pass(holes.data(), w, h);
    check(max_abs_diff(one.data(), &want) <= tol, || "fill pass".into())?;
    let mut cur = holes.data().to_vec();
    for _ in 0..16 {
        let next = oracle::fill_pass(&cur, w, h);
        if next == cur {
            break;
        }
        cur = next;
    }
    check(max_abs_diff(fill_gaps(&holes, 16).depth.data(), &cur) <= tol, || "fill to convergence".into())?;

    // affine fits
    let truth = random_map(&mut rng, w, h, 1.0, 20.0, 0.0);
    let count = rng.random_range(1..=n);
    let sparse = sample_sparse(&truth, count, seed);
    let global = fit_global(&rel, &sparse);
    let pts: Vec<(f64, f64)> = (0..n)
        .filter(|&i| sparse.as_depth().data()[i] > 0.0 && rel.data()[i] > 0.0)
        .map(|i| (rel.data()[i], sparse.as_depth().data()[i]))
        .collect();
    match (global, oracle::fit(&pts)) {
        (Ok(fit), Some((a, b))) => {
            let pred = apply_affine(&rel, AffineModel::Global(fit.params), PRED_FLOOR).unwrap();
            let want: Vec<f64> = rel.data().iter().map(|x| (a * x + b).max(PRED_FLOOR)).collect();
            check(max_abs_diff(pred.data(), &want) <= tol, || {
                format!("global fit ({}, {}) vs ({a}, {b})", fit.params.a, fit.params.b)
            })?;
        }
        (Ok(_), None) | (Err(Error::NoValidData), _) => {}
        (Err(e), _) => return Err(format!("global fit: {e}")),
    }
    let fits = fit_segmentwise(&rel, &seg, &sparse).unwrap();
    let got = apply_affine(&rel, AffineModel::Segmentwise { fits: &fits, seg: &seg }, PRED_FLOOR).unwrap();
    let want = oracle::segmentwise_prediction(rel.data(), sparse.as_depth().data(), &labels, PRED_FLOOR);
    check(max_abs_diff(got.data(), &want) <= tol, || {
        format!("segmentwise prediction differs by {:e}", max_abs_diff(got.data(), &want))
    })?;

    // rescale plan: alpha from segment means, beta from the reference cipher
    let plan_seed = rng.random::<u64>();
    let alpha_mode = if rng.random::<bool>() { AlphaMode::Formula } else { AlphaMode::Random };
    let plan = plan_rescale(&rel, &seg, &sparse, alpha_mode, BetaMode::Uniform, plan_seed).unwrap();
    let sp: Vec<f64> = sparse.as_depth().valid_values().collect();
    let sp_mean = sp.iter().sum::<f64>() / sp.len() as f64;
    let sp_min = sp.iter().cloned().fold(f64::INFINITY, f64::min);
    let sp_max = sp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let stats = oracle::segment_stats(rel.data(), &labels);
    let mut ab = Vec::new();
    for r in &plan.records {
        let [u0, u1] = chacha::first_u64s(plan_seed, u64::from(r.label));
        close("beta", r.beta, sp_min + (sp_max - sp_min) * chacha::unit(u0) - sp_mean, tol)?;
        let seg_mean = stats.iter().find(|s| s.0 == r.label).map(|s| s.2);
        let alpha = match (alpha_mode, seg_mean) {
            (AlphaMode::Formula, Some(m)) => 2.0 * sp_mean / m,
            (AlphaMode::Formula, None) => 0.0,
            (AlphaMode::Random, _) => sp_min + (sp_max - sp_min) * chacha::unit(u1),
        };
        check(r.degenerate == seg_mean.is_none(), || format!("degenerate flag for {}", r.label))?;
        close("alpha", r.alpha, alpha, tol * alpha.abs().max(1.0))?;
        ab.push((r.alpha, r.beta));
    }
    let mut want = oracle::rescale(rel.data(), &labels, &ab, plan.clamp_floor);
    for r in plan.records.iter().filter(|r| r.degenerate) {
        for i in (0..n).filter(|&i| labels[i] == r.label) {
            want[i] = (sp_mean + r.beta).max(plan.clamp_floor);
        }
    }
    let got = rescale(&rel, &seg, &plan).unwrap();
    check(max_abs_diff(got.data(), &want) <= tol, || "rescale".into())?;
    Ok(())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    for seed in 0..200 {
        oracle_instance(seed).map_err(|e| format!("instance {seed}: {e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("200 instances in {secs:.2} s"))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = test_rng(1000 + seed);
        let (w, h) = (rng.random_range(4..=40), rng.random_range(4..=40));
        let gt = random_map(&mut rng, w, h, 0.5, 80.0, 0.2);
        // pred >= 0.5 so 0.1·pred stays above the clamp floor
        let pred = random_map(&mut rng, w, h, 0.5, 80.0, 0.0);
        if gt.valid_count() == 0 {
            continue;
        }
        let base = silog(&pred, &gt).unwrap();
        for c in [0.1, 10.0] {
            let d = (silog(&pred.scaled(c).unwrap(), &gt).unwrap() - base).abs();
            worst = worst.max(d);
        }
    }
    check(worst < 1e-10, || format!("max |Δ| = {worst:e}"))?;
    Ok(format!("max |Δ| = {worst:.2e} over 50 maps"))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let mut worst_seg_rmse: f64 = 0.0;
    let mut min_glob_rmse = f64::INFINITY;
    let mut worst_seg_silog: f64 = 0.0;
    let mut min_glob_silog = f64::INFINITY;
    for seed in 0..20u64 {
        // pure per-region scales: SILog per segment is then exactly zero
        let spec = SceneSpec {
            width: 64,
            height: 48,
            regions: 4,
            distortion: DistortionKind::Random,
            scale_range: [0.2, 2.0],
            shift_range: [0.0, 0.0],
            seed,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).map_err(|e| e.to_string())?;
        let scales: Vec<f64> = scene.distortions.iter().map(|d| d.a).collect();
        for i in 0..4 {
            for j in 0..i {
                check((scales[i] - scales[j]).abs() > 1e-3, || format!("seed {seed}: repeated scale"))?;
            }
        }
        let mut n = 64;
        let sparse = loop {
            let s = sample_sparse(&scene.gt, n, seed);
            let ok = (1..=4u32).all(|l| {
                let mut v: Vec<f64> = s
                    .points()
                    .filter(|(i, _)| scene.labels.labels()[*i] == l)
                    .map(|(_, y)| y)
                    .collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len() >= 2
            });
            if ok {
                break s;
            }
            n *= 2;
        };
        let fits = fit_segmentwise(&scene.rel, &scene.labels, &sparse).map_err(|e| e.to_string())?;
        let seg_pred = apply_affine(&scene.rel, AffineModel::Segmentwise { fits: &fits, seg: &scene.labels }, PRED_FLOOR)
            .map_err(|e| e.to_string())?;
        let global = fit_global(&scene.rel, &sparse).map_err(|e| e.to_string())?;
        let glob_pred = apply_affine(&scene.rel, AffineModel::Global(global.params), PRED_FLOOR).map_err(|e| e.to_string())?;
        let seg_rmse = evaluate(&seg_pred, &scene.gt, &[], None).unwrap().rmse;
        let glob_rmse = evaluate(&glob_pred, &scene.gt, &[], None).unwrap().rmse;
        let seg_silog = silog_segment(&scene.rel, &scene.gt, &scene.labels).map_err(|e| e.to_string())?;
        let glob_silog = silog(&scene.rel, &scene.gt).map_err(|e| e.to_string())?;
        check(seg_rmse < 1e-6, || format!("seed {seed}: segment RMSE {seg_rmse:e}"))?;
        check(glob_rmse > 0.01, || format!("seed {seed}: global RMSE {glob_rmse:e}"))?;
        check(seg_silog < 1e-10, || format!("seed {seed}: segment SILog {seg_silog:e}"))?;
        check(glob_silog > 1e-4, || format!("seed {seed}: global SILog {glob_silog:e}"))?;
        worst_seg_rmse = worst_seg_rmse.max(seg_rmse);
        min_glob_rmse = min_glob_rmse.min(glob_rmse);
        worst_seg_silog = worst_seg_silog.max(seg_silog);
        min_glob_silog = min_glob_silog.min(glob_silog);
    }
    Ok(format!(
        "segment RMSE <= {worst_seg_rmse:.1e}, global RMSE >= {min_glob_rmse:.3}; \
         segment SILog <= {worst_seg_silog:.1e}, global SILog >= {min_glob_silog:.2e}"
    ))
}

// 4 ------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut segments = 0;
    for seed in 0..100u64 {
        let mut rng = test_rng(5000 + seed);
        let (w, h) = (rng.random_range(4..=48), rng.random_range(4..=48));
        let rel = random_map(&mut rng, w, h, 0.01, 50.0, 0.05);
        let k = rng.random_range(1..=8);
        let labels = random_labels(&mut rng, w * h, k, 0.05);
        let seg = SegmentMap::new(w, h, labels.clone()).unwrap();
        let truth = random_map(&mut rng, w, h, 0.5, 80.0, 0.0);
        let sparse = sample_sparse(&truth, rng.random_range(1..=w * h), seed);
        let plan = plan_rescale(&rel, &seg, &sparse, AlphaMode::Formula, BetaMode::Uniform, seed).map_err(|e| e.to_string())?;
        let sp: Vec<f64> = sparse.as_depth().valid_values().collect();
        let target = 2.0 * sp.iter().sum::<f64>() / sp.len() as f64;
        for r in plan.records.iter().filter(|r| !r.degenerate) {
            let vals: Vec<f64> = (0..w * h)
                .filter(|&i| labels[i] == r.label && rel.data()[i] > 0.0)
                .map(|i| r.alpha * rel.data()[i])
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let err = (m - target).abs() / target;
            check(err <= 1e-9, || format!("seed {seed} label {}: relative error {err:e}", r.label))?;
            worst = worst.max(err);
            segments += 1;
        }
    }
    Ok(format!("{segments} segments, max relative error {worst:.1e}"))
}

// 5 ------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let mut filled_total = 0usize;
    for seed in 0..100u64 {
        let mut rng = test_rng(9000 + seed);
        let (w, h) = (rng.random_range(2..=40), rng.random_range(2..=40));
        let start = random_map(&mut rng, w, h, 0.5, 20.0, 0.1);
        let mut cur = start.clone();
        let mut zeros = cur.len() - cur.valid_count();
        for pass in 0..64 {
            let (next, filled) = fill_pass(&cur);
            for i in 0..cur.len() {
                let before = cur.data()[i];
                let after = next.data()[i];
                if before != 0.0 {
                    check(before.to_bits() == after.to_bits(), || format!("seed {seed} pass {pass}: pixel {i} changed"))?;
                } else {
                    let want = oracle::fill_pixel(cur.data(), w, h, i / w, i % w);
                    check(after.to_bits() == want.to_bits(), || {
                        format!("seed {seed} pass {pass}: pixel {i} = {after}, oracle {want}")
                    })?;
                }
            }
            let z = next.len() - next.valid_count();
            check(z <= zeros, || format!("seed {seed}: zeros rose from {zeros} to {z}"))?;
            check(zeros - z == filled, || format!("seed {seed}: fill count mismatch"))?;
            filled_total += filled;
            zeros = z;
            cur = next;
            if filled == 0 || zeros == 0 {
                break;
            }
        }
        // nonzeros of the original survive the whole run
        let out = fill_gaps(&start, 64).depth;
        for (a, b) in start.data().iter().zip(out.data()) {
            check(*a == 0.0 || a.to_bits() == b.to_bits(), || format!("seed {seed}: fill_gaps changed a value"))?;
        }
    }
    Ok(format!("100 maps, {filled_total} pixels filled, all bit-exact"))
}

// 6 ------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let mut pairs = 0;
    for seed in 0..20u64 {
        let scene = generate_scene(&SceneSpec {
            width: 48,
            height: 40,
            regions: 6,
            seed,
            ..SceneSpec::default()
        })
        .map_err(|e| e.to_string())?;
        for (j, n) in [10usize, 100, 1000].into_iter().enumerate() {
            let sparse = sample_sparse(&scene.gt, n, seed + j as u64);
            for alpha_mode in [AlphaMode::Formula, AlphaMode::Random] {
                let cfg = PairConfig {
                    alpha_mode,
                    seed: seed * 7 + j as u64,
                    ..PairConfig::default()
                };
                let pair = generate_pair(&scene.rel, &scene.labels, &sparse, &cfg).map_err(|e| e.to_string())?;
                check(pair.sparse.mask() == sparse.mask(), || format!("seed {seed} n {n}: mask differs"))?;
                pairs += 1;
            }
        }
    }

    // noise statistics on a fully measured scene
    let (w, h) = (400, 300);
    let scene = generate_scene(&SceneSpec {
        width: w,
        height: h,
        regions: 5,
        depth_range: [20.0, 40.0],
        scale_range: [0.5, 1.5],
        shift_range: [0.0, 1.0],
        seed: 42,
        ..SceneSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let sparse = SparseDepth::new(scene.gt.clone());
    let cfg = PairConfig {
        noise: NoiseLevel::Absolute(0.1),
        beta_mode: BetaMode::Zero,
        seed: 3,
        ..PairConfig::default()
    };
    let pair = generate_pair(&scene.rel, &scene.labels, &sparse, &cfg).map_err(|e| e.to_string())?;
    check(pair.sparse.mask() == sparse.mask(), || "full mask differs".into())?;
    let resid: Vec<f64> = pair
        .sparse
        .as_depth()
        .data()
        .iter()
        .zip(pair.dense.data())
        .zip(sparse.mask())
        .filter(|(_, m)| *m)
        .map(|((s, d), _)| s - d)
        .collect();
    check(pair.dense.data().iter().all(|d| *d > 1.0), || "dense values near the clamp floor".into())?;
    check(resid.len() >= 100_000, || format!("only {} masked pixels", resid.len()))?;
    let m = resid.iter().sum::<f64>() / resid.len() as f64;
    let std = (resid.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
    check((0.095..=0.105).contains(&std), || format!("noise std {std}"))?;
    Ok(format!("{pairs} pairs mask-exact; noise std {std:.5} over {} pixels", resid.len()))
}

// 7 ------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let cfg = SsimConfig::default();
    let mut rng = test_rng(77);
    for _ in 0..10 {
        let x = random_map(&mut rng, 24, 20, 0.1, 30.0, 0.1);
        let total = loss_breakdown(&x, &x, &LossConfig::default(), &cfg).map_err(|e| e.to_string())?.total;
        check(total == 0.0, || format!("total_loss(x, x) = {total:e}"))?;
        let s = ssim_map(&x, &x, &cfg).map_err(|e| e.to_string())?;
        check(s.iter().all(|v| *v == 1.0), || "ssim_map(x, x) not identically 1".into())?;
    }

    let mut worst_const: f64 = 0.0;
    for (a, b) in [(0.2, 0.6), (0.5, 0.5), (0.0, 1.0), (0.9, 0.1), (0.33, 0.34)] {
        let x = DepthMap::filled(16, 16, a);
        let y = DepthMap::filled(16, 16, b);
        let want = (2.0 * a * b + cfg.c1()) / (a * a + b * b + cfg.c1());
        for v in ssim_map(&x, &y, &cfg).map_err(|e| e.to_string())? {
            worst_const = worst_const.max((v - want).abs());
        }
    }
    check(worst_const <= 1e-9, || format!("constant SSIM off by {worst_const:e}"))?;

    let pred = random_map(&mut rng, 13, 11, 0.1, 10.0, 0.0);
    let target = random_map(&mut rng, 13, 11, 0.1, 10.0, 0.0);
    let grad = mse_gradient(&pred, &target).map_err(|e| e.to_string())?;
    let step = 1e-4;
    let mut worst_grad: f64 = 0.0;
    for _ in 0..10 {
        let i = rng.random_range(0..pred.len());
        let bump = |d: f64| {
            let mut v = pred.data().to_vec();
            v[i] += d;
            mse_loss(&DepthMap::new(13, 11, v).unwrap(), &target).unwrap()
        };
        let fd = (bump(step) - bump(-step)) / (2.0 * step);
        worst_grad = worst_grad.max((fd - grad[i]).abs());
    }
    check(worst_grad <= 1e-6, || format!("gradient off by {worst_grad:e}"))?;
    Ok(format!("constant SSIM |Δ| = {worst_const:.1e}, gradient |Δ| = {worst_grad:.1e}"))
}

// 8 ------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let spec = BenchSpec {
        scene: SceneSpec {
            rel_noise: 0.05,
            ..SceneSpec::default()
        },
        seeds: 20,
        ..BenchSpec::default()
    };
    let rows = run_bench(&spec).map_err(|e| e.to_string())?;
    let means: Vec<(usize, f64)> = mean_rmse(&rows)
        .into_iter()
        .filter(|(_, m, _)| *m == Method::SegmentAffine)
        .map(|(n, _, r)| (n, r))
        .collect();
    let sparsities: Vec<usize> = means.iter().map(|m| m.0).collect();
    check(sparsities == [50, 200, 500, 2000], || format!("unexpected sparsities {sparsities:?}"))?;
    for pair in means.windows(2) {
        check(pair[1].1 <= pair[0].1, || format!("mean RMSE rises from {:?} to {:?}", pair[0], pair[1]))?;
    }
    let shown: Vec<String> = means.iter().map(|(n, r)| format!("{n}:{r:.4}")).collect();
    Ok(format!("segment-affine mean RMSE {}", shown.join(" ")))
}

// 9 ------------------------------------------------------------------------

fn run_cli(dir: &Path, args: &[&str]) -> std::result::Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_depthkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("depthkit {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Runs every subcommand in `dir` and returns stdout plus every file
/// written, in a fixed order.
fn cli_transcript(dir: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let steps: &[&[&str]] = &[
        &["scenegen", "--out-dir", "scene", "--width", "48", "--height", "40", "--regions", "4", "--rel-noise", "0.01", "--seed", "5"],
        &["segment", "--in", "scene/rel.pfm", "--out", "seg.pgm", "--threshold", "0.05"],
        &["sample", "--gt", "scene/gt.pfm", "--n", "150", "--seed", "9", "--out", "sparse.pfm"],
        &["sample", "--gt", "scene/gt.pfm", "--n", "40", "--seed", "9", "--out", "sparse.csv"],
        &["gen-pair", "--rel", "scene/rel.pfm", "--seg", "scene/labels.pgm", "--sparse", "sparse.pfm", "--seed", "11", "--out-dir", "pair"],
        &["gen-pair", "--rel", "scene/rel.pfm", "--seg", "seg.pgm", "--sparse", "sparse.csv", "--alpha", "random", "--sigma", "0.2", "--seed", "11", "--out-dir", "pair2"],
        &["fit-affine", "--mode", "global", "--rel", "scene/rel.pfm", "--sparse", "sparse.pfm", "--out", "global.pfm"],
        &["fit-affine", "--mode", "segment", "--rel", "scene/rel.pfm", "--sparse", "sparse.pfm", "--seg", "scene/labels.pgm", "--out", "segment.pfm", "--report", "fits.csv"],
        &["evaluate", "--pred", "segment.pfm", "--gt", "scene/gt.pfm", "--seg", "scene/labels.pgm", "--pred", "global.pfm", "--gt", "scene/gt.pfm", "--seg", "scene/labels.pgm", "--format", "csv"],
        &["evaluate", "--pred", "global.pfm", "--gt", "scene/gt.pfm", "--pool", "--scale100", "--format", "md"],
        &["loss", "--pred", "global.pfm", "--target", "scene/gt.pfm"],
        &["bench", "--out", "bench.csv", "--seeds", "3", "--seed", "2"],
    ];
    let mut transcript = Vec::new();
    for (k, args) in steps.iter().enumerate() {
        transcript.push((format!("stdout {k}"), run_cli(dir, args)?));
    }
    let mut files: Vec<_> = walk(dir);
    files.sort();
    for f in files {
        let rel = f.strip_prefix(dir).unwrap().display().to_string();
        transcript.push((rel, std::fs::read(&f).map_err(|e| e.to_string())?));
    }
    Ok(transcript)
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn round_trips() -> std::result::Result<usize, String> {
    let mut rng = test_rng(404);
    let mut count = 0;
    for _ in 0..25 {
        let (w, h) = (rng.random_range(1..=30), rng.random_range(1..=30));
        // pgm16 holds multiples of 1/256 up to 65535/256
        let pgm = DepthMap::from_fn(w, h, |_, _| {
            if rng.random::<f64>() < 0.2 { 0.0 } else { f64::from(rng.random_range(1..=65535u16)) / 256.0 }
        })
        .unwrap();
        let pfm = DepthMap::from_fn(w, h, |_, _| {
            if rng.random::<f64>() < 0.2 { 0.0 } else { f64::from(rng.random_range(1e-3f32..1e4)) }
        })
        .unwrap();
        let csv = random_map(&mut rng, w, h, 1e-3, 1e4, 0.7);
        for (map, fmt) in [(&pgm, DepthFormat::Pgm16), (&pfm, DepthFormat::Pfm32), (&csv, DepthFormat::CsvPoints)] {
            let bytes = encode_depth(map, fmt).map_err(|e| e.to_string())?;
            let back = decode_depth(&bytes, fmt, Some((w, h))).map_err(|e| format!("{fmt}: {e}"))?;
            check(back == *map, || format!("{fmt} round trip changed values"))?;
            check(encode_depth(&back, fmt).unwrap() == bytes, || format!("{fmt} re-encode differs"))?;
            count += 1;
        }
        let k = rng.random_range(1..=300u32).min((w * h) as u32);
        let seg = SegmentMap::new(w, h, random_labels(&mut rng, w * h, k, 0.1)).unwrap();
        let (back, densified) = decode_segments(&encode_segments(&seg).unwrap()).map_err(|e| e.to_string())?;
        check(back == seg && !densified, || "segment round trip".into())?;
        let gray = GrayImage::new(w, h, (0..w * h).map(|_| f64::from(rng.random_range(0..=255u8)) / 255.0).collect())
            .map_err(|e| e.to_string())?;
        let back = decode_gray(&encode_gray(&gray)).map_err(|e| e.to_string())?;
        check(max_abs_diff(back.values(), gray.values()) == 0.0, || "gray round trip".into())?;
        count += 2;
    }
    Ok(count)
}

/// A malformed file built by one of several deterministic corruptions of a
/// valid encoding.
fn malformed(rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<u8>, DepthFormat, bool) {
    let (w, h) = (rng.random_range(1..=12), rng.random_range(1..=12));
    let map = random_map(rng, w, h, 0.5, 200.0, 0.3);
    let fmt = [DepthFormat::Pgm16, DepthFormat::Pfm32, DepthFormat::CsvPoints][rng.random_range(0..3)];
    let segments = rng.random_range(0..6) == 0;
    let mut bytes = if segments {
        encode_segments(&SegmentMap::new(w, h, random_labels(rng, w * h, 3.min((w * h) as u32), 0.0)).unwrap()).unwrap()
    } else {
        encode_depth(&map, fmt).unwrap()
    };
    let text = |b: &[u8]| String::from_utf8_lossy(b).into_owned();
    let csv = fmt == DepthFormat::CsvPoints && !segments;
    match rng.random_range(0..8) {
        // truncate inside the header or payload
        0 if !csv => bytes.truncate(rng.random_range(0..bytes.len())),
        // trailing garbage
        1 if !csv => bytes.extend((0..rng.random_range(1..9)).map(|_| rng.random::<u8>())),
        // wrong magic
        2 if !csv => bytes[rng.random_range(0..2)] = b'X',
        // non-numeric or absurd dimensions
        3 if !csv => {
            let body = text(&bytes);
            let mut lines = body.splitn(3, '\n');
            let magic = lines.next().unwrap().to_string();
            let _dims = lines.next();
            let rest = lines.next().unwrap_or("").as_bytes().to_vec();
            let dims = ["-3 4", "abc 2", "0 5", "99999999999 99999999999", "7", "18446744073709551615 2"][rng.random_range(0..6)];
            bytes = format!("{magic}\n{dims}\n").into_bytes();
            bytes.extend(rest);
        }
        // bad maxval or scale
        4 if !csv => {
            let body = text(&bytes);
            let mut lines: Vec<&str> = body.splitn(4, '\n').collect();
            let bad = ["0", "70000", "nan", "inf", "x", ""][rng.random_range(0..6)];
            if bad.is_empty() {
                // drop the terminating whitespace of the header
                bytes = format!("{}\n{}\n{}", lines[0], lines[1], lines[2]).into_bytes();
            } else {
                let payload_at = lines[0].len() + lines[1].len() + lines[2].len() + 3;
                let payload = bytes[payload_at..].to_vec();
                lines[2] = bad;
                bytes = format!("{}\n{}\n{}\n", lines[0], lines[1], lines[2]).into_bytes();
                bytes.extend(payload);
            }
        }
        // empty file
        5 => bytes.clear(),
        _ if csv => {
            let bad = [
                "row,col\n0,0\n".to_string(),
                "row,col,depth_m\n0,0,abc\n".to_string(),
                format!("row,col,depth_m\n{},0,1.0\n", 12 + h),
                format!("row,col,depth_m\n0,{},1.0\n", 12 + w),
                "row,col,depth_m\n0,0,-2\n".to_string(),
                "row,col,depth_m\n0,0,1\n0,0,2\n".to_string(),
                "row,col,depth_m\n0,0\n".to_string(),
                "depth,row,col\n1,0,0\n".to_string(),
                "row,col,depth_m\n-1,0,1\n".to_string(),
                "row,col,depth_m\n0,0,inf\n".to_string(),
            ];
            bytes = bad[rng.random_range(0..bad.len())].clone().into_bytes();
        }
        // payload sample corrupted into an invalid value
        _ => {
            let body = text(&bytes);
            if body.starts_with("Pf") && !segments {
                let n = bytes.len();
                let k = rng.random_range(1..=w * h);
                let v = [f32::NAN, f32::INFINITY, -1.0][rng.random_range(0..3)];
                bytes[n - 4 * k..n - 4 * k + 4].copy_from_slice(&v.to_le_bytes());
            } else {
                bytes.truncate(bytes.len() - 1);
            }
        }
    }
    (bytes, fmt, segments)
}

fn fuzz() -> std::result::Result<usize, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = test_rng(31337);
    for k in 0..1000 {
        let (bytes, fmt, segments) = malformed(&mut rng);
        let path = dir.path().join(format!("case{k}"));
        std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
        let result = catch_unwind(AssertUnwindSafe(|| {
            if segments {
                depthkit::io::read_segments(&path).map(|_| ())
            } else {
                depthkit::io::read_depth(&path, fmt, Some((12, 12))).map(|_| ())
            }
        }));
        match result {
            Err(_) => return Err(format!("case {k} panicked: {:?}", String::from_utf8_lossy(&bytes))),
            Ok(Ok(())) => return Err(format!("case {k} ({fmt}) accepted: {:?}", String::from_utf8_lossy(&bytes))),
            Ok(Err(Error::Format { .. })) => {}
            Ok(Err(e)) => return Err(format!("case {k}: non-format error {e}")),
        }
    }
    Ok(1000)
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ta = cli_transcript(a.path())?;
    let tb = cli_transcript(b.path())?;
    check(ta.len() == tb.len(), || "different sets of outputs".into())?;
    for ((na, ba), (nb, bb)) in ta.iter().zip(&tb) {
        check(na == nb && ba == bb, || format!("{na} differs between runs"))?;
    }
    let trips = round_trips()?;
    let fuzzed = fuzz()?;
    Ok(format!("{} CLI outputs byte-identical; {trips} round trips lossless; {fuzzed} malformed files rejected", ta.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", criterion_1),
        ("SILog scale invariance", criterion_2),
        ("segment vs global affine ordering", criterion_3),
        ("formula-mode segment mean", criterion_4),
        ("gap-fill contract", criterion_5),
        ("sparsity preservation and noise level", criterion_6),
        ("loss identities", criterion_7),
        ("sparsity trend", criterion_8),
        ("determinism and I/O", criterion_9),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", k + 1),
            Err(why) => {
                println!("FAIL {}. {name}: {why}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
