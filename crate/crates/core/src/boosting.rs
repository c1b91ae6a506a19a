//! Discrete AdaBoost over decision stumps, used to pick the most
//! discriminative columns of a Haar feature matrix under per-sample weights.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::haar::FeatureMatrix;

/// Largest vote weight; also the weight of a zero-error stump.
pub const MAX_ALPHA: f64 = 20.723_265_836_946_41; // ln(1e9)

/// Rounds stop once the best stump is this close to chance.
pub const CHANCE_MARGIN: f64 = 1e-9;

/// Weighted errors (of a unit-sum distribution) closer than this are ties,
/// so rounding in the prefix sums cannot reorder equivalent stumps.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// One-feature threshold classifier: predicts `polarity` when
/// `x[feature_index] >= threshold`, `-polarity` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionStump {
    pub feature_index: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub alpha: f64,
}

impl DecisionStump {
    #[inline]
    pub fn vote(&self, x: f32) -> i8 {
        if x as f64 >= self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub stumps: Vec<DecisionStump>,
    /// Checksum of the filter bank the feature indices refer to.
    pub bank_checksum: String,
}

impl BoostModel {
    /// Distinct feature indices in order of first selection.
    pub fn selected_features(&self) -> Vec<usize> {
        let mut seen = std::collections::HashSet::new();
        self.stumps
            .iter()
            .map(|s| s.feature_index)
            .filter(|f| seen.insert(*f))
            .collect()
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn margin(&self, row: &[f32]) -> f64 {
        self.stumps
            .iter()
            .map(|s| s.alpha * s.vote(row[s.feature_index]) as f64)
            .sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("boost {} {}\n", self.stumps.len(), self.bank_checksum);
        for st in &self.stumps {
            let _ = writeln!(
                s,
                "{} {:?} {} {:?}",
                st.feature_index, st.threshold, st.polarity, st.alpha
            );
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or("empty model file")?
            .split_whitespace()
            .collect();
        if header.len() != 3 || header[0] != "boost" {
            return Err("bad boost model header".into());
        }
        let k: usize = header[1].parse().map_err(|_| "bad stump count")?;
        let stumps = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 4 {
                    return Err(format!("bad stump line {l:?}"));
                }
                let bad = || format!("bad stump line {l:?}");
                let polarity: i8 = t[2].parse().map_err(|_| bad())?;
                let alpha: f64 = t[3].parse().map_err(|_| bad())?;
                if polarity.abs() != 1 || !(alpha >= 0.0) {
                    return Err(format!("invalid stump {l:?}"));
                }
                Ok(DecisionStump {
                    feature_index: t[0].parse().map_err(|_| bad())?,
                    threshold: t[1].parse().map_err(|_| bad())?,
                    polarity,
                    alpha,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        if stumps.len() != k {
            return Err(format!("header says {k} stumps, found {}", stumps.len()));
        }
        Ok(BoostModel {
            stumps,
            bank_checksum: header[2].to_string(),
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

fn check_labels_weights(labels: &[i8], weights: &[f64], n: usize) -> Result<(f64, f64)> {
    if labels.len() != n || weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples, {} labels, {} weights",
            labels.len(),
            weights.len()
        )));
    }
    if labels.iter().any(|l| *l != 1 && *l != -1) {
        return Err(Error::InvalidInput("labels must be +1 or -1".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    let (mut pos, mut neg) = (0.0, 0.0);
    for (l, w) in labels.iter().zip(weights) {
        if *l > 0 {
            pos += w
        } else {
            neg += w
        }
    }
    if pos <= 0.0 || neg <= 0.0 {
        return Err(Error::Degenerate(
            "both classes need positive total weight".into(),
        ));
    }
    Ok((pos, neg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Split {
    threshold: f64,
    polarity: i8,
    error: f64,
}

/// Per-column sorted row order with the sorted values alongside, plus the
/// positions where a cut is legal (value strictly greater than the previous
/// entry's).
struct Columns {
    rows: usize,
    order: Vec<u32>,
    values: Vec<f32>,
    cuts: Vec<u32>,
    cut_offsets: Vec<usize>,
}

impl Columns {
    fn column(&self, c: usize) -> (&[u32], &[f32]) {
        let r = c * self.rows..(c + 1) * self.rows;
        (&self.order[r.clone()], &self.values[r])
    }

    fn cuts(&self, c: usize) -> &[u32] {
        &self.cuts[self.cut_offsets[c]..self.cut_offsets[c + 1]]
    }

    fn from_pairs(rows: usize, pairs: Vec<(f32, u32)>) -> Self {
        let order: Vec<u32> = pairs.iter().map(|p| p.1).collect();
        let values: Vec<f32> = pairs.iter().map(|p| p.0).collect();
        drop(pairs);
        let cols = values.len().checked_div(rows).unwrap_or(0);
        let mut cuts = Vec::new();
        let mut cut_offsets = Vec::with_capacity(cols + 1);
        cut_offsets.push(0);
        for c in 0..cols {
            let v = &values[c * rows..(c + 1) * rows];
            cuts.extend((1..rows).filter(|&k| v[k] > v[k - 1]).map(|k| k as u32));
            cut_offsets.push(cuts.len());
        }
        Columns {
            rows,
            order,
            values,
            cuts,
            cut_offsets,
        }
    }

    fn build(rows: usize, cols: usize, get: impl Fn(usize, usize) -> f32 + Sync, exec: Execution) -> Self {
        let mut pairs = vec![(0.0f32, 0u32); rows * cols];
        exec.for_each_chunk_mut(&mut pairs, rows.max(1), |c, out| {
            for (r, p) in out.iter_mut().enumerate() {
                *p = (get(r, c), r as u32);
            }
            out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        });
        Self::from_pairs(rows, pairs)
    }

    /// The same columns restricted to `keep` rows (renumbered in order).
    fn restrict(&self, keep: &[bool], exec: Execution) -> Self {
        let mut remap = vec![u32::MAX; self.rows];
        let mut n = 0u32;
        for (r, k) in keep.iter().enumerate() {
            if *k {
                remap[r] = n;
                n += 1;
            }
        }
        let rows = n as usize;
        let cols = self.order.len() / self.rows;
        let mut pairs = vec![(0.0f32, 0u32); rows * cols];
        exec.for_each_chunk_mut(&mut pairs, rows.max(1), |c, out| {
            let (order, values) = self.column(c);
            let mut k = 0;
            for (e, v) in order.iter().zip(values) {
                let r = remap[*e as usize];
                if r != u32::MAX {
                    out[k] = (*v, r);
                    k += 1;
                }
            }
        });
        Self::from_pairs(rows, pairs)
    }

    /// Best splits of columns `c0..c0 + L`. `signed[i] = y_i · w_i`;
    /// `pos`/`neg` are the class weight totals.
    ///
    /// Candidate thresholds are midpoints between adjacent distinct values.
    /// With `s` the signed weight below a cut, the error of polarity +1 is
    /// `neg + s` and of polarity −1 is `pos − s`, so the scan only tracks the
    /// extreme prefix sums. Several columns are scanned in lockstep so their
    /// running sums form independent dependency chains.
    #[inline]
    fn scan<const L: usize>(&self, c0: usize, signed: &[f64], pos: f64, neg: f64) -> [Split; L] {
        let cols: [(&[u32], &[f32]); L] = std::array::from_fn(|l| self.column(c0 + l));
        // prefix sums first (branch-free, L independent chains), then the
        // cut positions, where new extremes are rare and branches predictable
        let n = self.rows;
        let mut below = vec![0.0f64; L * n];
        let mut s = [0.0f64; L];
        for k in 0..n {
            for l in 0..L {
                below[l * n + k] = s[l];
                s[l] += signed[cols[l].0[k] as usize];
            }
        }
        let mut min_s = [f64::INFINITY; L];
        let mut min_k = [0usize; L];
        let mut max_s = [f64::NEG_INFINITY; L];
        let mut max_k = [0usize; L];
        for l in 0..L {
            let b = &below[l * n..(l + 1) * n];
            for &k in self.cuts(c0 + l) {
                let v = b[k as usize];
                if v < min_s[l] - TIE_TOLERANCE {
                    min_s[l] = v;
                    min_k[l] = k as usize;
                }
                if v > max_s[l] + TIE_TOLERANCE {
                    max_s[l] = v;
                    max_k[l] = k as usize;
                }
            }
        }
        std::array::from_fn(|l| {
            let values = cols[l].1;
            if min_k[l] == 0 {
                // constant column: everything lands on the `>=` side
                let threshold = values.first().map_or(0.0, |v| *v as f64);
                return if neg <= pos {
                    Split {
                        threshold,
                        polarity: 1,
                        error: neg,
                    }
                } else {
                    Split {
                        threshold,
                        polarity: -1,
                        error: pos,
                    }
                };
            }
            let mid = |k: usize| 0.5 * (values[k - 1] as f64 + values[k] as f64);
            let plus = Split {
                threshold: mid(min_k[l]),
                polarity: 1,
                error: neg + min_s[l],
            };
            let minus = Split {
                threshold: mid(max_k[l]),
                polarity: -1,
                error: pos - max_s[l],
            };
            let tie = (minus.error - plus.error).abs() <= TIE_TOLERANCE;
            if (!tie && minus.error < plus.error) || (tie && max_k[l] < min_k[l]) {
                minus
            } else {
                plus
            }
        })
    }

    fn scan_all(&self, signed: &[f64], pos: f64, neg: f64, exec: Execution) -> Vec<Split> {
        const L: usize = 4;
        let cols = self.order.len() / self.rows.max(1);
        let blocks = exec.map_range(cols.div_ceil(L), |b| {
            let c0 = b * L;
            if c0 + L <= cols {
                self.scan::<L>(c0, signed, pos, neg).to_vec()
            } else {
                (c0..cols).map(|c| self.scan::<1>(c, signed, pos, neg)[0]).collect()
            }
        });
        blocks.into_iter().flatten().collect()
    }
}

/// Weighted 0-1 error minimizing stump on one column. Weights need not be
/// normalized; the returned error is relative to their sum. Samples with
/// zero weight do not propose thresholds.
pub fn train_stump(column: &[f32], labels: &[i8], weights: &[f64]) -> Result<(DecisionStump, f64)> {
    if column.len() < 2 {
        return Err(Error::Degenerate("a stump needs at least 2 samples".into()));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    let (pos, neg) = check_labels_weights(labels, weights, column.len())?;
    let total = pos + neg;
    let active: Vec<usize> = (0..column.len()).filter(|&i| weights[i] > 0.0).collect();
    let signed: Vec<f64> = active
        .iter()
        .map(|&i| labels[i] as f64 * weights[i] / total)
        .collect();
    let cols = Columns::build(active.len(), 1, |r, _| column[active[r]], Execution::Sequential);
    let [split] = cols.scan::<1>(0, &signed, pos / total, neg / total);
    Ok((
        DecisionStump {
            feature_index: 0,
            threshold: split.threshold,
            polarity: split.polarity,
            alpha: 0.0,
        },
        split.error,
    ))
}

/// Presorted columns of a training matrix, built once and reused across
/// rounds and across weightings.
pub struct BoostTrainer {
    rows: usize,
    cols: usize,
    columns: Columns,
    exec: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostReport {
    pub model: BoostModel,
    /// Weighted error of each kept stump, in round order.
    pub epsilons: Vec<f64>,
    /// Why training ended before the requested rounds, if it did.
    pub early_stop: Option<String>,
}

impl BoostTrainer {
    pub fn new(matrix: &FeatureMatrix, exec: Execution) -> Result<Self> {
        let (rows, cols) = (matrix.rows(), matrix.cols());
        if rows < 2 || cols == 0 {
            return Err(Error::Degenerate(format!(
                "{rows}x{cols} matrix is too small to boost"
            )));
        }
        if rows >= u32::MAX as usize {
            return Err(Error::InvalidInput("too many samples".into()));
        }
        if matrix.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(BoostTrainer {
            rows,
            cols,
            columns: Columns::build(rows, cols, |r, c| matrix.get(r, c), exec),
            exec,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn best_stump(&self, columns: &Columns, signed: &[f64], pos: f64, neg: f64) -> (usize, Split) {
        let splits = columns.scan_all(signed, pos, neg, self.exec);
        // first minimum: ties go to the lower feature index
        let mut best = 0;
        for (c, s) in splits.iter().enumerate() {
            if s.error < splits[best].error - TIE_TOLERANCE {
                best = c;
            }
        }
        (best, splits[best])
    }

    /// Discrete AdaBoost from the (normalized) initial distribution
    /// `init_weights`, for at most `rounds` rounds. Samples with zero initial
    /// weight are left out entirely, so they cannot move a threshold.
    pub fn train(
        &self,
        labels: &[i8],
        init_weights: &[f64],
        rounds: usize,
        bank_checksum: &str,
    ) -> Result<BoostReport> {
        if rounds == 0 {
            return Err(Error::InvalidInput("at least one boosting round".into()));
        }
        let (pos, neg) = check_labels_weights(labels, init_weights, self.rows)?;
        let total = pos + neg;
        let keep: Vec<bool> = init_weights.iter().map(|w| *w > 0.0).collect();
        let restricted;
        let (columns, labels, mut w): (&Columns, Vec<i8>, Vec<f64>) = if keep.iter().all(|k| *k) {
            (
                &self.columns,
                labels.to_vec(),
                init_weights.iter().map(|x| x / total).collect(),
            )
        } else {
            restricted = self.columns.restrict(&keep, self.exec);
            let idx: Vec<usize> = (0..self.rows).filter(|&i| keep[i]).collect();
            (
                &restricted,
                idx.iter().map(|&i| labels[i]).collect(),
                idx.iter().map(|&i| init_weights[i] / total).collect(),
            )
        };
        let mut stumps = Vec::with_capacity(rounds);
        let mut epsilons = Vec::with_capacity(rounds);
        let mut early_stop = None;
        let mut signed = vec![0.0; w.len()];

        for round in 0..rounds {
            let (mut pos, mut neg) = (0.0, 0.0);
            for ((s, l), wi) in signed.iter_mut().zip(&labels).zip(&w) {
                *s = *l as f64 * wi;
                if *l > 0 {
                    pos += wi;
                } else {
                    neg += wi;
                }
            }
            let (feature, split) = self.best_stump(columns, &signed, pos, neg);
            let eps = split.error.max(0.0);
            if eps >= 0.5 - CHANCE_MARGIN {
                early_stop = Some(format!("round {round}: best stump error {eps:.6} is at chance"));
                break;
            }
            let alpha = if eps <= 0.0 {
                MAX_ALPHA
            } else {
                (0.5 * ((1.0 - eps) / eps).ln()).min(MAX_ALPHA)
            };
            let stump = DecisionStump {
                feature_index: feature,
                threshold: split.threshold,
                polarity: split.polarity,
                alpha,
            };
            stumps.push(stump);
            epsilons.push(eps);
            if eps <= 0.0 {
                early_stop = Some(format!("round {round}: zero-error stump"));
                break;
            }
            let (order, values) = columns.column(feature);
            for (e, v) in order.iter().zip(values) {
                let i = *e as usize;
                let h = stump.vote(*v) as f64;
                w[i] *= (-alpha * labels[i] as f64 * h).exp();
            }
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= sum);
        }
        if stumps.is_empty() {
            return Err(Error::Degenerate(
                early_stop.unwrap_or_else(|| "no stump better than chance".into()),
            ));
        }
        Ok(BoostReport {
            model: BoostModel {
                stumps,
                bank_checksum: bank_checksum.to_string(),
            },
            epsilons,
            early_stop,
        })
    }
}

/// One-shot AdaBoost (presorts, then trains).
pub fn adaboost_train(
    features: &FeatureMatrix,
    labels: &[i8],
    init_weights: &[f64],
    rounds: usize,
    bank_checksum: &str,
) -> Result<BoostReport> {
    BoostTrainer::new(features, Execution::default())?.train(labels, init_weights, rounds, bank_checksum)
}

/// Ensemble labels (`>= 0` margin is +1) and margins for every row.
pub fn boost_predict(model: &BoostModel, features: &FeatureMatrix) -> Result<(Vec<i8>, Vec<f64>)> {
    if model.stumps.is_empty() {
        return Err(Error::InvalidInput("empty boost model".into()));
    }
    if let Some(s) = model.stumps.iter().find(|s| s.feature_index >= features.cols()) {
        return Err(Error::OutOfBounds(format!(
            "model uses feature {}, matrix has {} columns",
            s.feature_index,
            features.cols()
        )));
    }
    let margins: Vec<f64> = (0..features.rows())
        .map(|r| model.margin(features.row(r)))
        .collect();
    let labels = margins.iter().map(|m| if *m >= 0.0 { 1 } else { -1 }).collect();
    Ok((labels, margins))
}
