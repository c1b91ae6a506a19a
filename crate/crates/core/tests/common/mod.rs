//! Brute-force oracles and invariant checks shared by the integration tests
//! and the acceptance run. Checks return `Err(description)` rather than
//! panicking so the acceptance run can report them.

#![allow(dead_code)]

use rand::Rng as _;

use occlufall::boosting::{adaboost_train, boost_predict, train_stump, BoostReport};
use occlufall::corpus::{FrameLabel, VideoRecord};
use occlufall::experiment::{build_video_splits, DatasetConfig, VideoSplits};
use occlufall::haar::{FeatureMatrix, IntegralImage};
use occlufall::occlusion::{augment_video, dynamic_child_id, dynamic_occluder_track, OccluderPreset};
use occlufall::rng::rng;
use occlufall::segmentation::{label_segment, segment_indices, LabelMode, SegmentLabel, SegmentParams, Split};
use occlufall::svm::{train_weighted_svm, SvmModel, SvmParams};
use occlufall::synth::{generate_synth_corpus, SynthCorpusSpec};
use occlufall::trainer::{sample_weights, WeightingPolicy};
use occlufall::corpus::Origin;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn small_corpus(videos: usize, frames: usize, seed: u64) -> Vec<VideoRecord> {
    generate_synth_corpus(&SynthCorpusSpec {
        videos,
        frames,
        seed,
        ..SynthCorpusSpec::default()
    })
    .expect("valid spec")
}

// ---------------------------------------------------------------- integral

pub fn brute_rect_sum(pixels: &[i64], width: usize, x: usize, y: usize, w: usize, h: usize) -> i64 {
    let mut s = 0;
    for yy in y..y + h {
        for xx in x..x + w {
            s += pixels[yy * width + xx];
        }
    }
    s
}

/// `count` random rectangles on a random image against direct summation.
pub fn check_rect_sums(seed: u64, count: usize) -> Check {
    let mut r = rng(seed);
    let (w, h) = (r.random_range(1..=80usize), r.random_range(1..=60usize));
    let pixels: Vec<u16> = (0..w * h).map(|_| r.random_range(0..=765u16)).collect();
    let wide: Vec<i64> = pixels.iter().map(|&p| p as i64).collect();
    let ii = IntegralImage::new(w, h, &pixels);
    for _ in 0..count {
        let x = r.random_range(0..w);
        let y = r.random_range(0..h);
        let rw = r.random_range(0..=w - x);
        let rh = r.random_range(0..=h - y);
        let got = ii.rect_sum(x, y, rw, rh).map_err(|e| e.to_string())?;
        let want = brute_rect_sum(&wide, w, x, y, rw, rh);
        ensure!(got == want, "rect ({x},{y},{rw},{rh}) on {w}x{h}: {got} != {want}");
    }
    Ok(())
}

// ------------------------------------------------------------------ stumps

/// Weighted error of `x >= t ? p : -p`, relative to the total weight.
pub fn stump_error(values: &[f32], labels: &[i8], weights: &[f64], t: f64, p: i8) -> f64 {
    let total: f64 = weights.iter().sum();
    let wrong: f64 = (0..values.len())
        .filter(|&i| (if values[i] as f64 >= t { p } else { -p }) != labels[i])
        .map(|i| weights[i])
        .sum();
    wrong / total
}

/// Every midpoint between adjacent distinct values of positively weighted
/// samples, both polarities, ascending threshold with +1 first; the first
/// strict minimum wins. A column with a single distinct value puts every
/// sample on the `>=` side.
pub fn exhaustive_stump(values: &[f32], labels: &[i8], weights: &[f64]) -> (f64, i8, f64) {
    let mut distinct: Vec<f32> = (0..values.len())
        .filter(|&i| weights[i] > 0.0)
        .map(|i| values[i])
        .collect();
    distinct.sort_by(f32::total_cmp);
    distinct.dedup();
    if distinct.len() == 1 {
        let t = distinct[0] as f64;
        let plus = stump_error(values, labels, weights, t, 1);
        let minus = stump_error(values, labels, weights, t, -1);
        return if plus <= minus { (t, 1, plus) } else { (t, -1, minus) };
    }
    let mut best = (f64::NAN, 0i8, f64::INFINITY);
    for pair in distinct.windows(2) {
        let t = 0.5 * (pair[0] as f64 + pair[1] as f64);
        for p in [1i8, -1] {
            let e = stump_error(values, labels, weights, t, p);
            if e < best.2 - 1e-12 {
                best = (t, p, e);
            }
        }
    }
    best
}

/// `columns` random `n`-sample columns with repeated values and random
/// weights, each trained and compared against the exhaustive search.
pub fn check_stumps(seed: u64, columns: usize, n: usize) -> Check {
    let mut r = rng(seed);
    for c in 0..columns {
        let levels = r.random_range(2..=n as u32);
        let values: Vec<f32> = (0..n).map(|_| r.random_range(0..levels) as f32 * 0.5).collect();
        let mut labels: Vec<i8> = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
        labels[0] = 1;
        labels[1] = -1;
        let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
        let (stump, err) = train_stump(&values, &labels, &weights).map_err(|e| e.to_string())?;
        let (t, p, e) = exhaustive_stump(&values, &labels, &weights);
        ensure!((err - e).abs() < 1e-12, "column {c}: error {err} vs exhaustive {e}");
        ensure!(
            stump.threshold == t && stump.polarity == p,
            "column {c}: ({}, {}) vs exhaustive ({t}, {p})",
            stump.threshold,
            stump.polarity
        );
        let own = stump_error(&values, &labels, &weights, stump.threshold, stump.polarity);
        ensure!((own - err).abs() < 1e-12, "column {c}: reported {err}, actual {own}");
    }
    Ok(())
}

// ----------------------------------------------------------------- weights

/// `Σ wᵢ·lᵢ = L_n + λ·(n/o)·L_o` on random origins and losses.
pub fn check_weight_identity(seed: u64, cases: usize) -> Check {
    let mut r = rng(seed);
    for case in 0..cases {
        let n = r.random_range(1..300usize);
        let o = r.random_range(0..3000usize);
        let lambda: f64 = r.random_range(0.0..=1.0);
        let mut origins = vec![Origin::Normal; n];
        origins.extend((0..o).map(|_| {
            if r.random_bool(0.5) {
                Origin::DynamicOccluded
            } else {
                Origin::RealisticOccluded
            }
        }));
        let losses: Vec<f64> = (0..n + o).map(|_| r.random_range(0.0..5.0)).collect();
        let policy = WeightingPolicy::from_origins(lambda, &origins).map_err(|e| e.to_string())?;
        let w = sample_weights(&origins, &policy).map_err(|e| e.to_string())?;
        let lhs: f64 = w.iter().zip(&losses).map(|(a, b)| a * b).sum();
        let l_n: f64 = losses[..n].iter().sum();
        let l_o: f64 = losses[n..].iter().sum();
        let rhs = if o == 0 { l_n } else { l_n + lambda * (n as f64 / o as f64) * l_o };
        ensure!(
            (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
            "case {case} (n={n}, o={o}, λ={lambda}): {lhs} vs {rhs}"
        );
    }
    Ok(())
}

// --------------------------------------------------------------------- svm

pub fn tight_svm(c: f64) -> SvmParams {
    SvmParams {
        c,
        max_epochs: 200_000,
        pg_tolerance: 1e-12,
        rel_tolerance: 0.0,
        ..SvmParams::default()
    }
}

/// Two overlapping Gaussian blobs in `d` dimensions.
pub fn blobs(n: usize, d: usize, separation: f64, seed: u64) -> (FeatureMatrix, Vec<i8>) {
    let mut r = rng(seed);
    let mut gauss = move || {
        let u1: f64 = r.random_range(1e-12..1.0);
        let u2: f64 = r.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let row: Vec<f32> = (0..d)
            .map(|j| (gauss() + if j == 0 { y as f64 * separation } else { 0.0 }) as f32)
            .collect();
        rows.push(row);
        labels.push(y);
    }
    (FeatureMatrix::from_rows(&rows).expect("rectangular"), labels)
}

pub fn max_abs_diff(a: &SvmModel, b: &SvmModel) -> f64 {
    a.w.iter()
        .zip(&b.w)
        .map(|(x, y)| (x - y).abs())
        .fold((a.b - b.b).abs(), f64::max)
}

/// Decision values agree everywhere on `x` and the models match.
pub fn models_match(a: &SvmModel, b: &SvmModel, x: &FeatureMatrix, tol: f64) -> Check {
    let da = a.decision_matrix(x).map_err(|e| e.to_string())?;
    let db = b.decision_matrix(x).map_err(|e| e.to_string())?;
    let worst = da.iter().zip(&db).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    ensure!(worst <= tol, "decision values differ by {worst:e}");
    let dw = max_abs_diff(a, b);
    ensure!(dw <= tol, "(w, b) differ by {dw:e}");
    Ok(())
}

/// Training with extra `g = 0` samples (mislabeled copies) reproduces the
/// model trained without them.
pub fn check_zero_weight_removal(seed: u64) -> Check {
    let (x, y) = blobs(40, 3, 1.0, seed);
    let g = vec![1.0; 40];
    let base = train_weighted_svm(&x, &y, &g, &tight_svm(1.0), "t").map_err(|e| e.to_string())?;
    let mut r = rng(seed ^ 0xABCD);
    let mut rows: Vec<Vec<f32>> = (0..40).map(|i| x.row(i).to_vec()).collect();
    let mut y2 = y.clone();
    let mut g2 = g.clone();
    for _ in 0..10 {
        let i = r.random_range(0..40);
        rows.push(x.row(i).iter().map(|v| v * 3.0 + 1.0).collect());
        y2.push(-y[i]);
        g2.push(0.0);
    }
    let x2 = FeatureMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let with = train_weighted_svm(&x2, &y2, &g2, &tight_svm(1.0), "t").map_err(|e| e.to_string())?;
    models_match(&base.model, &with.model, &x, 1e-4)
}

/// Norm of the smallest subgradient of the primal objective at `model`,
/// computed in the model's standardized, bias-augmented coordinates.
/// Samples with margin within `band` of 1 get their hinge subgradient
/// coefficient chosen in [0, 1] to minimize the norm.
pub fn kkt_residual(x: &FeatureMatrix, y: &[i8], g: &[f64], c: f64, model: &SvmModel, band: f64) -> f64 {
    let kept: Vec<usize> = (0..model.dim()).filter(|j| !model.dropped.contains(j)).collect();
    let z = |i: usize| -> Vec<f64> {
        let mut v: Vec<f64> = kept
            .iter()
            .map(|&j| (x.get(i, j) as f64 - model.mean[j]) / model.std[j])
            .collect();
        v.push(1.0);
        v
    };
    let mut wt: Vec<f64> = kept.iter().map(|&j| model.w[j]).collect();
    wt.push(model.b);
    // w̃ − Σ over margin violators of C·gᵢ·yᵢ·z̃ᵢ
    let mut fixed = wt.clone();
    let mut free = Vec::new();
    for i in 0..x.rows() {
        if g[i] == 0.0 {
            continue;
        }
        let zi = z(i);
        let m = y[i] as f64 * zi.iter().zip(&wt).map(|(a, b)| a * b).sum::<f64>();
        let coef = c * g[i] * y[i] as f64;
        if m < 1.0 - band {
            for (fk, zk) in fixed.iter_mut().zip(&zi) {
                *fk -= coef * zk;
            }
        } else if m <= 1.0 + band {
            free.push((coef, zi));
        }
    }
    // minimize ‖fixed − Σ βₖ·coefₖ·zₖ‖ over β ∈ [0, 1] by coordinate descent
    let mut beta = vec![0.0f64; free.len()];
    for _ in 0..5000 {
        let mut moved = 0.0f64;
        for (k, (coef, zk)) in free.iter().enumerate() {
            let a: Vec<f64> = zk.iter().map(|v| coef * v).collect();
            let aa: f64 = a.iter().map(|v| v * v).sum();
            if aa == 0.0 {
                continue;
            }
            // residual r = fixed − Σ β a; optimal βₖ given the rest
            let ra: f64 = fixed.iter().zip(&a).map(|(r, a)| r * a).sum();
            let target = (beta[k] + ra / aa).clamp(0.0, 1.0);
            let step = target - beta[k];
            if step != 0.0 {
                for (r, av) in fixed.iter_mut().zip(&a) {
                    *r -= step * av;
                }
                beta[k] = target;
                moved = moved.max(step.abs());
            }
        }
        if moved < 1e-14 {
            break;
        }
    }
    fixed.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Hinge loss of sample `i` under `model`.
pub fn hinge(model: &SvmModel, x: &FeatureMatrix, y: &[i8], i: usize) -> f64 {
    let m = model.decision(x.row(i)).expect("dimension") * y[i] as f64;
    (1.0 - m).max(0.0)
}

// ----------------------------------------------------------------------- pca

/// Principal axes by power iteration with deflation on the sample
/// covariance (n − 1 denominator).
pub fn power_pca(x: &FeatureMatrix, k: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j) as f64).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0f64; d]; d];
    for i in 0..n {
        for a in 0..d {
            let da = x.get(i, a) as f64 - mean[a];
            for b in 0..d {
                cov[a][b] += da * (x.get(i, b) as f64 - mean[b]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|v| *v /= (n - 1) as f64);
    let mut axes = Vec::new();
    let mut values = Vec::new();
    for _ in 0..k {
        let mut v: Vec<f64> = (0..d).map(|j| 1.0 + j as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let mut nv: Vec<f64> = (0..d).map(|a| (0..d).map(|b| cov[a][b] * v[b]).sum()).collect();
            let norm = nv.iter().map(|t| t * t).sum::<f64>().sqrt();
            nv.iter_mut().for_each(|t| *t /= norm);
            let delta = nv.iter().zip(&v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            v = nv;
            lambda = norm;
            if delta < 1e-15 {
                break;
            }
        }
        for a in 0..d {
            for b in 0..d {
                cov[a][b] -= lambda * v[a] * v[b];
            }
        }
        axes.push(v);
        values.push(lambda);
    }
    (mean, axes, values)
}

/// Anisotropic Gaussian cloud so the leading eigenvalues are well separated.
pub fn pca_fixture(n: usize, d: usize, seed: u64) -> FeatureMatrix {
    let mut r = rng(seed);
    let mut gauss = move || {
        let u1: f64 = r.random_range(1e-12..1.0);
        let u2: f64 = r.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| {
            let latent: Vec<f64> = (0..d).map(|j| gauss() * 4.0 / (1.0 + j as f64)).collect();
            // mix the axes so components are not coordinate-aligned
            (0..d)
                .map(|j| (latent[j] + 0.3 * latent[(j + 1) % d] + 2.0) as f32)
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(&rows).expect("rectangular")
}

pub fn check_pca(seed: u64, n: usize, d: usize) -> Check {
    let x = pca_fixture(n, d, seed);
    let pca = occlufall::eval::pca_project_2d(&x).map_err(|e| e.to_string())?;
    let (mean, axes, values) = power_pca(&x, 2);
    for j in 0..d {
        ensure!((pca.mean[j] - mean[j]).abs() < 1e-9, "mean[{j}]");
    }
    for k in 0..2 {
        let dot: f64 = pca.components[k].iter().zip(&axes[k]).map(|(a, b)| a * b).sum();
        let s = dot.signum();
        let worst = pca.components[k]
            .iter()
            .zip(&axes[k])
            .map(|(a, b)| (a - s * b).abs())
            .fold(0.0, f64::max);
        ensure!(worst < 1e-6, "component {k} differs by {worst:e} ({n}x{d}, seed {seed})");
        ensure!(
            (pca.eigenvalues[k] - values[k]).abs() < 1e-6 * values[k].max(1.0),
            "eigenvalue {k}: {} vs {}",
            pca.eigenvalues[k],
            values[k]
        );
        for i in 0..n {
            let p: f64 = (0..d).map(|j| (x.get(i, j) as f64 - mean[j]) * axes[k][j]).sum();
            ensure!(
                (pca.projection[i][k] - s * p).abs() < 1e-6,
                "projection[{i}][{k}]: {} vs {}",
                pca.projection[i][k],
                s * p
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- boosting

/// Replays the boosting weight trajectory from the stumps alone: each
/// reported ε must be the weighted error under the replayed distribution,
/// every distribution must be a probability vector, and the ensemble's
/// weighted training error must respect Π 2√(ε(1−ε)).
pub fn check_boost_run(x: &FeatureMatrix, y: &[i8], init: &[f64], report: &BoostReport) -> Check {
    let total: f64 = init.iter().sum();
    let mut w: Vec<f64> = init.iter().map(|v| v / total).collect();
    ensure!(
        report.epsilons.len() == report.model.stumps.len(),
        "{} epsilons for {} stumps",
        report.epsilons.len(),
        report.model.stumps.len()
    );
    for (t, (stump, eps)) in report.model.stumps.iter().zip(&report.epsilons).enumerate() {
        ensure!(*eps < 0.5, "round {t}: ε = {eps}");
        ensure!(stump.alpha >= 0.0, "round {t}: α = {}", stump.alpha);
        let votes: Vec<i8> = (0..x.rows()).map(|i| stump.vote(x.get(i, stump.feature_index))).collect();
        let replayed: f64 = (0..x.rows()).filter(|&i| votes[i] != y[i]).map(|i| w[i]).sum();
        ensure!((replayed - eps).abs() < 1e-9, "round {t}: ε {eps} but replayed {replayed}");
        for i in 0..x.rows() {
            w[i] *= (-stump.alpha * (y[i] * votes[i]) as f64).exp();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let s: f64 = w.iter().sum();
        ensure!((s - 1.0).abs() <= 1e-9, "round {t}: weights sum to {s}");
        ensure!(w.iter().all(|v| v.is_finite() && *v >= 0.0), "round {t}: invalid weight");
    }
    let (pred, _) = boost_predict(&report.model, x).map_err(|e| e.to_string())?;
    let err: f64 = (0..x.rows()).filter(|&i| pred[i] != y[i]).map(|i| init[i] / total).sum();
    let bound: f64 = report.epsilons.iter().map(|e| 2.0 * (e * (1.0 - e)).sqrt()).product();
    ensure!(err <= bound + 1e-12, "ensemble error {err} above bound {bound}");
    Ok(())
}

/// Random boosting problem with one duplicated, oppositely labeled row so
/// that no stump is ever perfect.
pub fn boost_fixture(seed: u64, n: usize, d: usize) -> (FeatureMatrix, Vec<i8>, Vec<f64>) {
    let mut r = rng(seed);
    let mut rows: Vec<Vec<f32>> = (0..n).map(|_| (0..d).map(|_| r.random_range(0..40) as f32).collect()).collect();
    let mut y: Vec<i8> = rows
        .iter()
        .map(|row| {
            let s = row[0] - row[1 % d] + r.random_range(-15.0..15.0);
            if s > 0.0 { 1 } else { -1 }
        })
        .collect();
    rows[1] = rows[0].clone();
    y[0] = 1;
    y[1] = -1;
    let init: Vec<f64> = (0..n)
        .map(|i| if i < 2 { 1.0 } else if r.random_bool(0.1) { 0.0 } else { r.random_range(0.1..3.0) })
        .collect();
    (FeatureMatrix::from_rows(&rows).expect("rectangular"), y, init)
}

pub fn check_boosting(seed: u64) -> Check {
    let (x, y, init) = boost_fixture(seed, 60, 4);
    let run = adaboost_train(&x, &y, &init, 15, "c").map_err(|e| e.to_string())?;
    check_boost_run(&x, &y, &init, &run)?;
    let again = adaboost_train(&x, &y, &init, 15, "c").map_err(|e| e.to_string())?;
    ensure!(again.model == run.model, "retraining changed the model");
    // same stumps; α only up to the round-off of renormalizing
    let scaled: Vec<f64> = init.iter().map(|v| v * 37.5).collect();
    let s = adaboost_train(&x, &y, &scaled, 15, "c").map_err(|e| e.to_string())?;
    ensure!(s.model.rounds() == run.model.rounds(), "scaling the initial weights changed the round count");
    for (t, (a, b)) in run.model.stumps.iter().zip(&s.model.stumps).enumerate() {
        ensure!(
            (a.feature_index, a.threshold, a.polarity) == (b.feature_index, b.threshold, b.polarity)
                && (a.alpha - b.alpha).abs() <= 1e-9 * a.alpha.max(1.0),
            "scaling the initial weights changed stump {t}: {a:?} vs {b:?}"
        );
    }
    Ok(())
}

// --------------------------------------------------------------- occlusion

/// Ten variants (or fewer with reasons), bit-identical on rerun, each equal
/// to its parent outside the occluder and overlapping the visible joints.
pub fn check_augmentation(video: &VideoRecord, seed: u64) -> Check {
    let a = augment_video(video, seed).map_err(|e| e.to_string())?;
    let b = augment_video(video, seed).map_err(|e| e.to_string())?;
    ensure!(a.videos.len() + a.omitted.len() == 10, "{} + {} presets", a.videos.len(), a.omitted.len());
    ensure!(a.videos.len() <= 10, "{} variants", a.videos.len());
    ensure!(a.videos == b.videos, "{}: rerun is not bit-identical", video.id());
    let (w, h) = video.frames.dims();
    let track = video.keypoints.as_ref().ok_or("no keypoints")?;
    for preset in OccluderPreset::all_for_frame(w, h) {
        let id = dynamic_child_id(video.id(), preset.part);
        let Some(child) = a.videos.iter().find(|v| v.id() == id) else {
            ensure!(
                a.omitted.iter().any(|(p, _)| *p == preset.part),
                "{id} neither produced nor reported"
            );
            continue;
        };
        ensure!(child.annotation == video.annotation, "{id}: annotation changed");
        ensure!(child.parent_id.as_deref() == Some(video.id()), "{id}: wrong parent");
        ensure!(child.origin == Origin::DynamicOccluded, "{id}: origin {}", child.origin);
        let occ = dynamic_occluder_track(video, &preset, seed).map_err(|e| e.to_string())?;
        for (f, (orig, occluded)) in video.frames.frames().iter().zip(child.frames.frames()).enumerate() {
            let rect = occ.rects[f];
            for yy in 0..h {
                for xx in 0..w {
                    let inside = rect.is_some_and(|r| r.contains(xx, yy));
                    let (p, q) = (orig.get(xx, yy), occluded.get(xx, yy));
                    if inside {
                        ensure!(q == occ.fill, "{id} frame {f}: ({xx},{yy}) not filled");
                    } else {
                        ensure!(p == q, "{id} frame {f}: pixel ({xx},{yy}) outside the occluder changed");
                    }
                }
            }
            let visible: Vec<_> = preset
                .joints
                .iter()
                .map(|&j| track.pose(f)[j])
                .filter(|j| j.is_visible())
                .collect();
            if visible.is_empty() {
                continue;
            }
            let r = rect.ok_or_else(|| format!("{id} frame {f}: joints visible but no occluder"))?;
            let bx0 = visible.iter().map(|j| j.x).fold(f32::MAX, f32::min);
            let bx1 = visible.iter().map(|j| j.x).fold(f32::MIN, f32::max);
            let by0 = visible.iter().map(|j| j.y).fold(f32::MAX, f32::min);
            let by1 = visible.iter().map(|j| j.y).fold(f32::MIN, f32::max);
            ensure!(
                r.x0 as f32 <= bx1 && bx0 <= r.x1 as f32 && r.y0 as f32 <= by1 && by0 <= r.y1 as f32,
                "{id} frame {f}: occluder {r:?} misses the joints ({bx0},{by0})-({bx1},{by1})"
            );
        }
    }
    Ok(())
}

// ------------------------------------------------------------ segmentation

pub fn check_segmentation(labels: &[FrameLabel], params: &SegmentParams) -> Check {
    let len = labels.len();
    let windows = segment_indices(len, params);
    let span = params.span();
    let expected = if len >= span { (len - span) / params.stride + 1 } else { 0 };
    ensure!(windows.len() == expected, "{} windows, expected {expected}", windows.len());
    ensure!(windows == segment_indices(len, params), "windows are not reproducible");
    for (k, w) in windows.iter().enumerate() {
        ensure!(w.len() == params.segment_len, "window {k} has {} frames", w.len());
        ensure!(w[0] == k * params.stride, "window {k} starts at {}", w[0]);
        ensure!(
            w.windows(2).all(|p| p[1] - p[0] == params.sampling_rate),
            "window {k} is not evenly sampled"
        );
        let falls = w.iter().filter(|&&i| labels[i] == FrameLabel::Fall).count();
        let mixed = falls > 0 && falls < w.len();
        let train = label_segment(w, labels, LabelMode::Train);
        let test = label_segment(w, labels, LabelMode::Test);
        ensure!(test != SegmentLabel::Discarded, "window {k} discarded in test mode");
        if mixed {
            ensure!(train == SegmentLabel::Discarded, "mixed window {k} kept for training");
            let want = if 2 * falls >= w.len() { SegmentLabel::Fall } else { SegmentLabel::NonFall };
            ensure!(test == want, "mixed window {k}: {test:?}, majority says {want:?}");
        } else {
            let want = if falls > 0 { SegmentLabel::Fall } else { SegmentLabel::NonFall };
            ensure!(train == want && test == want, "pure window {k}: {train:?}/{test:?}");
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ splits

/// Every occluded video sits in its parent's split and no root video is in
/// more than one split.
pub fn check_video_splits(corpus: &[VideoRecord], cfg: &DatasetConfig) -> Check {
    let s: VideoSplits = build_video_splits(corpus, cfg).map_err(|e| e.to_string())?;
    let roots: std::collections::HashMap<&str, Split> = s
        .provenance
        .splits
        .iter()
        .filter(|(id, _)| corpus.iter().any(|v| v.id() == *id && v.parent_id.is_none()))
        .map(|(id, sp)| (id.as_str(), *sp))
        .collect();
    let lists = [
        (Split::Train, &s.train),
        (Split::Val, &s.val_clean),
        (Split::Val, &s.val_occluded),
        (Split::Test, &s.test_clean),
        (Split::Test, &s.test_occluded),
    ];
    let mut seen = std::collections::HashMap::new();
    for (split, videos) in lists {
        for v in videos.iter() {
            let root = v.parent_id.as_deref().unwrap_or(v.id());
            let assigned = roots.get(root).ok_or_else(|| format!("{root} has no split"))?;
            ensure!(*assigned == split, "{} is in {split} but its source {root} is in {assigned}", v.id());
            if let Some(prev) = seen.insert(v.id().to_string(), split) {
                ensure!(prev == split, "{} appears in {prev} and {split}", v.id());
            }
        }
    }
    for (child, parent) in &s.provenance.parents {
        ensure!(
            s.provenance.splits.get(child) == s.provenance.splits.get(parent),
            "provenance: {child} and {parent} differ"
        );
    }
    Ok(())
}
