//! Cost-weighted linear SVM.
//!
//! Minimizes `½‖w̃‖² + C·Σ gᵢ·max(0, 1 − yᵢ·w̃·z̃ᵢ)` where `z̃ᵢ` is the
//! standardized sample with a constant 1 appended, so the bias is the last
//! component of `w̃` (and is regularized along with `w`). Solved by dual
//! coordinate descent: each `αᵢ` lives in the box `[0, C·gᵢ]`, so a sample
//! with `gᵢ = 0` never enters the solution.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::haar::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once the spread of projected gradients drops below this.
    pub pg_tolerance: f64,
    /// ... or the dual objective changes by less than this, relatively.
    pub rel_tolerance: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            max_epochs: 2000,
            pg_tolerance: 1e-5,
            rel_tolerance: 1e-9,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Weights over standardized features; zero on dropped features.
    pub w: Vec<f64>,
    pub b: f64,
    pub mean: Vec<f64>,
    /// Standard deviations; 1 on dropped features.
    pub std: Vec<f64>,
    /// Features with zero (weighted) variance in the training data.
    pub dropped: Vec<usize>,
    /// Identifies the feature columns this model expects.
    pub checksum: String,
}

#[derive(Debug, Clone)]
pub struct SvmReport {
    pub model: SvmModel,
    /// `½‖w̃‖² − Σα` after each epoch; never increases.
    pub objective: Vec<f64>,
    /// The primal objective at the returned solution.
    pub primal: f64,
    pub epochs: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn decision(&self, x: &[f32]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} features, sample has {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(self.decision_unchecked(x))
    }

    #[inline]
    fn decision_unchecked(&self, x: &[f32]) -> f64 {
        let mut m = self.b;
        for j in 0..x.len() {
            m += self.w[j] * (x[j] as f64 - self.mean[j]) / self.std[j];
        }
        m
    }

    /// Fall (`true`) iff the margin is strictly positive.
    pub fn predict(&self, x: &[f32]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }

    pub fn decision_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} features, matrix has {}",
                self.dim(),
                m.cols()
            )));
        }
        Ok((0..m.rows()).map(|r| self.decision_unchecked(m.row(r))).collect())
    }

    pub fn to_text(&self) -> String {
        let row = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let mut s = format!("svm {} {}\n", self.dim(), self.checksum);
        let _ = writeln!(s, "mean {}", row(&self.mean));
        let _ = writeln!(s, "std {}", row(&self.std));
        let _ = writeln!(s, "w {}", row(&self.w));
        let _ = writeln!(s, "b {:?}", self.b);
        let dropped: Vec<String> = self.dropped.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "dropped {}", dropped.join(" "));
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or("empty model file")?.split_whitespace().collect();
        if header.len() != 3 || header[0] != "svm" {
            return Err("bad svm model header".into());
        }
        let dim: usize = header[1].parse().map_err(|_| "bad dimension")?;
        let mut field = |name: &str| -> std::result::Result<Vec<String>, String> {
            let line = lines.next().ok_or(format!("missing {name} line"))?;
            let mut t = line.split_whitespace();
            if t.next() != Some(name) {
                return Err(format!("expected {name} line, found {line:?}"));
            }
            Ok(t.map(str::to_string).collect())
        };
        let floats = |v: Vec<String>, name: &str| -> std::result::Result<Vec<f64>, String> {
            let out = v
                .iter()
                .map(|x| x.parse::<f64>().map_err(|_| format!("bad number {x:?} in {name}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(out)
        };
        let mean = floats(field("mean")?, "mean")?;
        let std = floats(field("std")?, "std")?;
        let w = floats(field("w")?, "w")?;
        let b = floats(field("b")?, "b")?;
        let dropped = field("dropped")?
            .iter()
            .map(|x| x.parse::<usize>().map_err(|_| format!("bad index {x:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if mean.len() != dim || std.len() != dim || w.len() != dim || b.len() != 1 {
            return Err(format!("vectors do not match dimension {dim}"));
        }
        if std.iter().any(|s| !(*s > 0.0)) {
            return Err("non-positive standard deviation".into());
        }
        if dropped.iter().any(|d| *d >= dim) {
            return Err("dropped index out of range".into());
        }
        Ok(SvmModel {
            w,
            b: b[0],
            mean,
            std,
            dropped,
            checksum: header[2].to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|r| Error::parse(path, r))
    }
}

/// Weighted mean/std per column; columns whose spread is negligible against
/// their magnitude are dropped.
fn weighted_scaler(x: &FeatureMatrix, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let d = x.cols();
    let total: f64 = g.iter().sum();
    let mut mean = vec![0.0; d];
    for (r, gi) in g.iter().enumerate() {
        if *gi > 0.0 {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += gi * *v as f64;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; d];
    for (r, gi) in g.iter().enumerate() {
        if *gi > 0.0 {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                let dv = *v as f64 - m;
                *s += gi * dv * dv;
            }
        }
    }
    let mut std = vec![1.0; d];
    let mut dropped = Vec::new();
    for j in 0..d {
        let s = (var[j] / total).sqrt();
        if s > 1e-9 * mean[j].abs().max(1.0) {
            std[j] = s;
        } else {
            dropped.push(j);
        }
    }
    (mean, std, dropped)
}

pub fn train_weighted_svm(
    x: &FeatureMatrix,
    y: &[i8],
    g: &[f64],
    params: &SvmParams,
    checksum: &str,
) -> Result<SvmReport> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n || g.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples, {} labels, {} weights",
            y.len(),
            g.len()
        )));
    }
    if !(params.c > 0.0) || !params.c.is_finite() {
        return Err(Error::InvalidInput(format!("C must be positive, got {}", params.c)));
    }
    if y.iter().any(|l| *l != 1 && *l != -1) {
        return Err(Error::InvalidInput("labels must be +1 or -1".into()));
    }
    if g.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("sample weights must be finite and non-negative".into()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    for class in [1i8, -1] {
        if !y.iter().zip(g).any(|(l, w)| *l == class && *w > 0.0) {
            return Err(Error::Degenerate(format!(
                "no positively weighted sample of class {class:+}"
            )));
        }
    }

    let (mean, std, dropped) = weighted_scaler(x, g);
    let kept: Vec<usize> = (0..d).filter(|j| !dropped.contains(j)).collect();
    let dz = kept.len() + 1;

    // standardized, bias-augmented rows of the samples that can carry weight
    let active: Vec<usize> = (0..n).filter(|&i| g[i] > 0.0).collect();
    let mut z = vec![0.0f64; active.len() * dz];
    for (a, &i) in active.iter().enumerate() {
        let row = x.row(i);
        let zr = &mut z[a * dz..(a + 1) * dz];
        for (k, &j) in kept.iter().enumerate() {
            zr[k] = (row[j] as f64 - mean[j]) / std[j];
        }
        zr[dz - 1] = 1.0;
    }
    let qdiag: Vec<f64> = z.chunks_exact(dz).map(|r| r.iter().map(|v| v * v).sum()).collect();
    let upper: Vec<f64> = active.iter().map(|&i| params.c * g[i]).collect();
    let ya: Vec<f64> = active.iter().map(|&i| y[i] as f64).collect();

    let mut alpha = vec![0.0f64; active.len()];
    let mut wt = vec![0.0f64; dz];
    let mut order: Vec<usize> = (0..active.len()).collect();
    let mut rng = rng::rng(params.seed);
    let mut objective = Vec::new();
    let mut converged = false;
    let mut epochs = 0;
    let dual = |wt: &[f64], alpha: &[f64]| {
        0.5 * wt.iter().map(|v| v * v).sum::<f64>() - alpha.iter().sum::<f64>()
    };

    while epochs < params.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &a in &order {
            let zr = &z[a * dz..(a + 1) * dz];
            let grad = ya[a] * dot(&wt, zr) - 1.0;
            let pg = if alpha[a] <= 0.0 {
                grad.min(0.0)
            } else if alpha[a] >= upper[a] {
                grad.max(0.0)
            } else {
                grad
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-14 {
                let old = alpha[a];
                alpha[a] = (old - grad / qdiag[a]).clamp(0.0, upper[a]);
                let step = (alpha[a] - old) * ya[a];
                if step != 0.0 {
                    wt.iter_mut().zip(zr).for_each(|(w, v)| *w += step * v);
                }
            }
        }
        let obj = dual(&wt, &alpha);
        let prev = objective.last().copied();
        objective.push(obj);
        if pg_max - pg_min <= params.pg_tolerance {
            converged = true;
            break;
        }
        if let Some(p) = prev {
            if (p - obj).abs() <= params.rel_tolerance * p.abs().max(1e-12) {
                converged = true;
                break;
            }
        }
    }

    let mut primal = 0.5 * wt.iter().map(|v| v * v).sum::<f64>();
    for (a, &i) in active.iter().enumerate() {
        let m = ya[a] * dot(&wt, &z[a * dz..(a + 1) * dz]);
        primal += params.c * g[i] * (1.0 - m).max(0.0);
    }

    let mut w = vec![0.0; d];
    for (k, &j) in kept.iter().enumerate() {
        w[j] = wt[k];
    }
    Ok(SvmReport {
        model: SvmModel {
            w,
            b: wt[dz - 1],
            mean,
            std,
            dropped,
            checksum: checksum.to_string(),
        },
        objective,
        primal,
        epochs,
        converged,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
