//! Metrics, the 2-D PCA diagnostic and the per-frame timing benchmark.
//! Fall is the positive class throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corpus::{Origin, VideoRecord};
use crate::error::{Error, Result};
use crate::haar::{extract_features, FeatureMatrix, FeatureSet, FilterBank};
use crate::segmentation::Segment;
use crate::trainer::TrainedPipeline;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[i8], labels: &[i8]) -> Result<Self> {
        if predicted.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions for {} labels",
                predicted.len(),
                labels.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &l) in predicted.iter().zip(labels) {
            c.add(p > 0, l > 0);
        }
        Ok(c)
    }

    fn add(&mut self, predicted_fall: bool, is_fall: bool) {
        match (predicted_fall, is_fall) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// `None` when the slice has no falls.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `None` when nothing was predicted as a fall.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: Confusion,
    /// "normal", "occluded", then one row per occluded origin present.
    pub slices: Vec<(String, Confusion)>,
    pub timing: Option<BenchStats>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn from_predictions(predicted: &[i8], labels: &[i8], origins: &[Origin]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty test set".into()));
        }
        if origins.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} origins for {} labels",
                origins.len(),
                labels.len()
            )));
        }
        let overall = Confusion::from_predictions(predicted, labels)?;
        let mut normal = Confusion::default();
        let mut occluded = Confusion::default();
        let mut by_origin: BTreeMap<&'static str, Confusion> = BTreeMap::new();
        for ((&p, &l), &o) in predicted.iter().zip(labels).zip(origins) {
            if o.is_occluded() {
                occluded.add(p > 0, l > 0);
                by_origin.entry(o.as_str()).or_default().add(p > 0, l > 0);
            } else {
                normal.add(p > 0, l > 0);
            }
        }
        let mut slices = vec![("normal".to_string(), normal), ("occluded".to_string(), occluded)];
        slices.extend(by_origin.into_iter().map(|(k, c)| (k.to_string(), c)));
        let mut warnings = Vec::new();
        for (name, c) in std::iter::once(("all", &overall)).chain(slices.iter().map(|(n, c)| (n.as_str(), c))) {
            if c.total() == 0 {
                continue;
            }
            if c.recall().is_none() {
                warnings.push(format!("{name}: no fall samples, recall is n/a"));
            }
            if c.precision().is_none() {
                warnings.push(format!("{name}: no fall predictions, precision is n/a"));
            }
        }
        Ok(EvalReport {
            overall,
            slices,
            timing: None,
            warnings,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.overall.accuracy().unwrap_or(0.0)
    }

    pub fn slice(&self, name: &str) -> Option<&Confusion> {
        self.slices.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    fn rows(&self) -> impl Iterator<Item = (&str, &Confusion)> {
        std::iter::once(("all", &self.overall))
            .chain(self.slices.iter().map(|(n, c)| (n.as_str(), c)))
            .filter(|(_, c)| c.total() > 0)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:>7} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
            "slice", "samples", "TP", "FP", "TN", "FN", "accuracy", "recall", "precision"
        );
        for (name, c) in self.rows() {
            let _ = writeln!(
                s,
                "{:<20} {:>7} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
                name,
                c.total(),
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                fmt_metric(c.accuracy()),
                fmt_metric(c.recall()),
                fmt_metric(c.precision())
            );
        }
        if let Some(t) = &self.timing {
            let _ = writeln!(
                s,
                "timing: median {:.3} ms/frame, p95 {:.3} ms/frame over {} segments",
                t.median_ms, t.p95_ms, t.segments
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    pub const CSV_HEADER: &'static str = "slice,samples,tp,fp,tn,fn,accuracy,recall,precision";

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for (name, c) in self.rows() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                name,
                c.total(),
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                fmt_metric(c.accuracy()),
                fmt_metric(c.recall()),
                fmt_metric(c.precision())
            );
        }
        s
    }
}

pub fn evaluate(pipeline: &TrainedPipeline, test: &FeatureSet) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let predicted = pipeline.predict(&test.matrix)?;
    EvalReport::from_predictions(&predicted, &test.labels(), &test.origins())
}

/// An accuracy change read both ways: absolute percentage points and relative
/// percent of the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub points: f64,
    pub relative_percent: Option<f64>,
}

pub fn improvement(baseline: f64, improved: f64) -> Improvement {
    Improvement {
        points: 100.0 * (improved - baseline),
        relative_percent: (baseline > 0.0).then(|| 100.0 * (improved - baseline) / baseline),
    }
}

impl std::fmt::Display for Improvement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+.2} points", self.points)?;
        match self.relative_percent {
            Some(r) => write!(f, " ({r:+.2}% relative)"),
            None => write!(f, " (relative n/a)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    /// Unit principal axes, descending eigenvalue.
    pub components: [Vec<f64>; 2],
    pub eigenvalues: [f64; 2],
    /// Fraction of total variance per component.
    pub explained: [f64; 2],
    pub projection: Vec<[f64; 2]>,
}

/// Largest dimension the eigensolver is asked to handle.
pub const PCA_MAX_DIM: usize = 2500;

/// Projects mean-centered rows onto the top two covariance eigenvectors.
/// Each axis is signed so its largest-magnitude loading is positive. When
/// there are fewer samples than dimensions the eigenproblem is solved on the
/// Gram matrix instead of the covariance.
pub fn pca_project_2d(features: &FeatureMatrix) -> Result<Pca2> {
    let (n, d) = (features.rows(), features.cols());
    if n < 3 || d < 2 {
        return Err(Error::InvalidInput(format!("pca needs >= 3 samples and >= 2 dims, got {n}x{d}")));
    }
    if n.min(d) > PCA_MAX_DIM {
        return Err(Error::InvalidInput(format!(
            "pca on {n}x{d} is too large; select at most {PCA_MAX_DIM} columns or rows"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, &v) in mean.iter_mut().zip(features.row(r)) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |r, c| features.get(r, c) as f64 - mean[c]);
    let denom = (n - 1) as f64;
    let total: f64 = x.iter().map(|v| v * v).sum::<f64>() / denom;

    let (vals, axes): ([f64; 2], [Vec<f64>; 2]) = if d <= n {
        let cov = x.transpose() * &x / denom;
        let (vals, vecs) = top2(cov);
        (vals, [vecs[0].clone(), vecs[1].clone()])
    } else {
        let gram = &x * x.transpose() / denom;
        let (vals, vecs) = top2(gram);
        // v = Xᵀu / ‖Xᵀu‖
        let axes = vecs.map(|u| {
            let v = x.transpose() * nalgebra::DVector::from_vec(u);
            let norm = v.norm();
            if norm > 0.0 {
                (v / norm).iter().copied().collect()
            } else {
                vec![0.0; d]
            }
        });
        (vals, axes)
    };
    let axes = axes.map(fix_sign);
    let projection = (0..n)
        .map(|r| {
            let row = x.row(r);
            let dot = |a: &Vec<f64>| row.iter().zip(a).map(|(p, q)| p * q).sum::<f64>();
            [dot(&axes[0]), dot(&axes[1])]
        })
        .collect();
    let explained = vals.map(|v| if total > 0.0 { v / total } else { 0.0 });
    Ok(Pca2 {
        mean,
        components: axes,
        eigenvalues: vals,
        explained,
        projection,
    })
}

fn top2(m: DMatrix<f64>) -> ([f64; 2], [Vec<f64>; 2]) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pick = |i: usize| {
        let k = order[i];
        // rank-deficient input: round-off may leave tiny negatives
        (eig.eigenvalues[k].max(0.0), eig.eigenvectors.column(k).iter().copied().collect::<Vec<f64>>())
    };
    let (a, va) = pick(0);
    let (b, vb) = pick(1);
    ([a, b], [va, vb])
}

fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0.0f64;
    for &x in &v {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
        }
    }
    if best < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

impl Pca2 {
    /// `pc1,pc2,label,origin` rows under a comment header.
    pub fn to_csv(&self, segments: &[Segment]) -> Result<String> {
        if segments.len() != self.projection.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} segments for {} projected rows",
                segments.len(),
                self.projection.len()
            )));
        }
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# 2-D PCA of dynamic Haar segment features; explained variance {:.4}, {:.4}",
            self.explained[0], self.explained[1]
        );
        let _ = writeln!(s, "pc1,pc2,label,origin");
        for (p, seg) in self.projection.iter().zip(segments) {
            let label = match seg.label.sign() {
                Some(1) => "fall",
                Some(_) => "nonfall",
                None => "unlabeled",
            };
            let _ = writeln!(s, "{},{},{},{}", p[0], p[1], label, seg.origin);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchStats {
    pub segments: usize,
    pub frames_per_segment: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
}

pub const BENCH_MIN_SEGMENTS: usize = 100;

/// Wall time per frame of feature extraction plus classification, one
/// segment at a time on the calling thread. Only the pipeline's selected
/// filters are evaluated.
pub fn benchmark(
    pipeline: &TrainedPipeline,
    bank: &FilterBank,
    videos: &[VideoRecord],
    segments: &[Segment],
) -> Result<BenchStats> {
    if segments.len() < BENCH_MIN_SEGMENTS {
        return Err(Error::InvalidInput(format!(
            "benchmark needs >= {BENCH_MIN_SEGMENTS} segments, got {}",
            segments.len()
        )));
    }
    let compact = pipeline.compact_bank(bank)?;
    let by_id: BTreeMap<&str, &VideoRecord> = videos.iter().map(|v| (v.id(), v)).collect();
    let mut per_frame = Vec::with_capacity(segments.len());
    let mut frames_total = 0usize;
    for seg in segments {
        let video = by_id
            .get(seg.video_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("segment refers to unknown video {}", seg.video_id)))?;
        let frames: Vec<_> = seg.frame_indices.iter().map(|&i| &video.frames.frames()[i]).collect();
        let start = Instant::now();
        let x = extract_features(&frames, &compact)?;
        let margin = pipeline.svm.decision(&x)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(margin);
        per_frame.push(elapsed / frames.len() as f64);
        frames_total += frames.len();
    }
    let mean_ms = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
    per_frame.sort_by(f64::total_cmp);
    Ok(BenchStats {
        segments: segments.len(),
        frames_per_segment: frames_total as f64 / segments.len() as f64,
        median_ms: quantile(&per_frame, 0.5),
        p95_ms: quantile(&per_frame, 0.95),
        mean_ms,
    })
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng as _;

    #[test]
    fn metric_example() {
        let c = Confusion { tp: 22, fn_: 78, fp: 66, tn: 434 };
        assert_eq!(c.recall(), Some(0.22));
        assert_eq!(c.precision(), Some(0.25));
        assert_eq!(c.accuracy(), Some(456.0 / 600.0));
    }

    #[test]
    fn perfect_predictions() {
        let labels = [1, -1, 1, -1, -1];
        let r = EvalReport::from_predictions(&labels, &labels, &[Origin::Normal; 5]).unwrap();
        assert_eq!(r.overall.accuracy(), Some(1.0));
        assert_eq!(r.overall.recall(), Some(1.0));
        assert_eq!(r.overall.precision(), Some(1.0));
    }

    #[test]
    fn no_falls_is_reported_not_divided() {
        let r = EvalReport::from_predictions(&[-1, 1], &[-1, -1], &[Origin::Normal; 2]).unwrap();
        assert_eq!(r.overall.recall(), None);
        assert!(r.warnings.iter().any(|w| w.contains("recall is n/a")));
        assert!(r.to_table().contains("n/a"));
        assert!(EvalReport::from_predictions(&[], &[], &[]).is_err());
    }

    #[test]
    fn origin_slices_partition_the_samples() {
        let origins = [
            Origin::Normal,
            Origin::DynamicOccluded,
            Origin::RealisticOccluded,
            Origin::DynamicOccluded,
        ];
        let r = EvalReport::from_predictions(&[1, 1, -1, -1], &[1, -1, -1, 1], &origins).unwrap();
        assert_eq!(r.slice("normal").unwrap().total(), 1);
        assert_eq!(r.slice("occluded").unwrap().total(), 3);
        assert_eq!(r.slice("dynamic_occluded").unwrap().total(), 2);
        assert_eq!(r.slice("realistic_occluded").unwrap().total(), 1);
        let csv = r.to_csv();
        assert!(csv.starts_with(EvalReport::CSV_HEADER));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn improvement_has_both_readings() {
        let i = improvement(0.68, 0.95);
        assert!((i.points - 27.0).abs() < 1e-9);
        assert!((i.relative_percent.unwrap() - 27.0 / 0.68).abs() < 1e-9);
        assert_eq!(improvement(0.0, 0.5).relative_percent, None);
    }

    #[test]
    fn pca_on_a_line() {
        let dir = [1.0, -2.0, 0.5, 3.0, 1.0];
        let rows: Vec<Vec<f32>> = (0..20)
            .map(|i| dir.iter().map(|d| (d * i as f64 * 0.3 + 1.0) as f32).collect())
            .collect();
        let p = pca_project_2d(&FeatureMatrix::from_rows(&rows).unwrap()).unwrap();
        assert!((p.explained[0] - 1.0).abs() < 1e-6);
        assert!(p.explained[1].abs() < 1e-6);
        // largest loading (the 3.0 direction) is positive
        assert!(p.components[0][3] > 0.0);
    }

    #[test]
    fn pca_isotropic_cloud() {
        let mut r = rng(5);
        let gauss = |r: &mut crate::rng::Rng| {
            // Box-Muller
            let (u, v): (f64, f64) = (r.random_range(1e-12..1.0), r.random());
            ((-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()) as f32
        };
        let rows: Vec<Vec<f32>> = (0..1000).map(|_| vec![gauss(&mut r), gauss(&mut r)]).collect();
        let p = pca_project_2d(&FeatureMatrix::from_rows(&rows).unwrap()).unwrap();
        let ratio = p.explained[0] / p.explained[1];
        assert!((0.8..=1.25).contains(&ratio), "{ratio}");
        let var = |k: usize| p.projection.iter().map(|q| q[k] * q[k]).sum::<f64>();
        assert!(var(0) >= var(1));
    }

    #[test]
    fn wide_matrix_uses_the_gram_path() {
        let mut r = rng(8);
        let rows: Vec<Vec<f32>> = (0..6).map(|_| (0..40).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let p = pca_project_2d(&m).unwrap();
        // projection variance equals the eigenvalue
        for k in 0..2 {
            let var = p.projection.iter().map(|q| q[k] * q[k]).sum::<f64>() / 5.0;
            assert!((var - p.eigenvalues[k]).abs() < 1e-9);
            let norm: f64 = p.components[k].iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        assert!(pca_project_2d(&FeatureMatrix::from_rows(&rows[..2]).unwrap()).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
