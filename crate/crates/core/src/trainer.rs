//! Weighted training: normal and occluded samples are balanced by one
//! per-sample weight that feeds both AdaBoost's initial distribution and the
//! SVM's per-sample costs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::boosting::{BoostModel, BoostTrainer};
use crate::corpus::Origin;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::haar::{FeatureMatrix, FeatureSet, FilterBank};
use crate::segmentation::{check_split_hygiene, Split, SplitAssignment};
use crate::svm::{train_weighted_svm, SvmModel, SvmParams};

pub const DEFAULT_LAMBDA: f64 = 0.6;
pub const DEFAULT_FEATURES: usize = 300;
pub const C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// λ grid 0, 0.1, …, 1.0.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingPolicy {
    pub lambda: f64,
    /// Normal training samples.
    pub n: usize,
    /// Occluded training samples.
    pub o: usize,
}

impl WeightingPolicy {
    pub fn new(lambda: f64, n: usize, o: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidInput(format!("lambda {lambda} outside [0, 1]")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("no normal training samples".into()));
        }
        Ok(WeightingPolicy { lambda, n, o })
    }

    pub fn from_origins(lambda: f64, origins: &[Origin]) -> Result<Self> {
        let o = origins.iter().filter(|o| o.is_occluded()).count();
        Self::new(lambda, origins.len() - o, o)
    }

    /// λ·n/o, or 0 without occluded samples.
    pub fn occluded_weight(&self) -> f64 {
        if self.o == 0 {
            0.0
        } else {
            self.lambda * self.n as f64 / self.o as f64
        }
    }
}

/// 1 for normal samples, λ·n/o for occluded ones, so that for any per-sample
/// loss `Σ wᵢ·lᵢ = L_n + λ·(n/o)·L_o`.
pub fn sample_weights(origins: &[Origin], policy: &WeightingPolicy) -> Result<Vec<f64>> {
    let o = origins.iter().filter(|o| o.is_occluded()).count();
    if o != policy.o || origins.len() - o != policy.n {
        return Err(Error::InvalidInput(format!(
            "policy counts n={}, o={} but tags give n={}, o={o}",
            policy.n,
            policy.o,
            origins.len() - o
        )));
    }
    let ow = policy.occluded_weight();
    Ok(origins
        .iter()
        .map(|o| if o.is_occluded() { ow } else { 1.0 })
        .collect())
}

/// Where each training video came from, for the contamination check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub splits: SplitAssignment,
    /// child id → parent id
    pub parents: BTreeMap<String, String>,
    pub split_seed: u64,
}

impl Provenance {
    /// Parents and children share splits, and every training segment comes
    /// from a training video.
    pub fn check(&self, train: &FeatureSet) -> Result<()> {
        check_split_hygiene(
            self.parents.iter().map(|(c, p)| (c.as_str(), Some(p.as_str()))),
            &self.splits,
        )?;
        for s in &train.segments {
            match self.splits.get(&s.video_id) {
                Some(Split::Train) => {}
                Some(other) => {
                    return Err(Error::Contamination(format!(
                        "training segment from {} which is in {other}",
                        s.video_id
                    )))
                }
                None => {
                    return Err(Error::Contamination(format!(
                        "training segment from {} which has no split",
                        s.video_id
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Boosting rounds K.
    pub features: usize,
    pub svm: SvmParams,
    /// C values tried on the validation set; empty means use `svm.c`.
    pub c_grid: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: DEFAULT_LAMBDA,
            features: DEFAULT_FEATURES,
            svm: SvmParams::default(),
            c_grid: C_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub boost: BoostModel,
    pub svm: SvmModel,
    /// Distinct bank indices the SVM consumes, in SVM column order.
    pub selected: Vec<usize>,
    pub policy: WeightingPolicy,
    pub bank_checksum: String,
    pub split_seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingReport {
    pub epsilons: Vec<f64>,
    pub rounds: usize,
    pub distinct_features: usize,
    pub early_stop: Option<String>,
    pub svm_objective: Vec<f64>,
    pub svm_primal: f64,
    pub svm_converged: bool,
    pub c: f64,
    /// (C, validation accuracy) for every C tried.
    pub c_scores: Vec<(f64, f64)>,
    pub boost_seconds: f64,
    pub svm_seconds: f64,
}

impl TrainingReport {
    pub fn seconds(&self) -> f64 {
        self.boost_seconds + self.svm_seconds
    }
}

/// Checksum tying an SVM to a bank and a column selection.
pub fn selection_checksum(bank_checksum: &str, selected: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update(bank_checksum.as_bytes());
    for s in selected {
        h.update((*s as u64).to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

impl TrainedPipeline {
    fn check_bank(&self, bank_checksum: &str) -> Result<()> {
        if bank_checksum != self.bank_checksum {
            return Err(Error::ChecksumMismatch {
                expected: self.bank_checksum.clone(),
                found: bank_checksum.to_string(),
            });
        }
        Ok(())
    }

    /// SVM margins for full-bank feature rows.
    pub fn decision(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        let cols = features.select_columns(&self.selected)?;
        self.svm.decision_matrix(&cols)
    }

    /// +1 fall, −1 non-fall.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<i8>> {
        Ok(self
            .decision(features)?
            .into_iter()
            .map(|m| if m > 0.0 { 1 } else { -1 })
            .collect())
    }

    /// The bank restricted to the selected filters, in SVM column order, so
    /// a deployed detector only evaluates what it uses.
    pub fn compact_bank(&self, bank: &FilterBank) -> Result<FilterBank> {
        self.check_bank(&bank.checksum())?;
        bank.subset(&self.selected)
    }

    /// `boost.txt`, `svm.txt` and `pipeline.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.boost.write(&dir.join("boost.txt"))?;
        self.svm.write(&dir.join("svm.txt"))?;
        let mut s = String::new();
        let _ = writeln!(s, "bank_checksum={}", self.bank_checksum);
        let _ = writeln!(s, "split_seed={}", self.split_seed);
        let _ = writeln!(s, "lambda={:?}", self.policy.lambda);
        let _ = writeln!(s, "n={}", self.policy.n);
        let _ = writeln!(s, "o={}", self.policy.o);
        let sel: Vec<String> = self.selected.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "selected={}", sel.join(","));
        let p = dir.join("pipeline.txt");
        fs::write(&p, s).map_err(|e| Error::io(&p, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let boost = BoostModel::read(&dir.join("boost.txt"))?;
        let svm = SvmModel::read(&dir.join("svm.txt"))?;
        let p = dir.join("pipeline.txt");
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let kv: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::parse(&p, format!("missing {k}")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::parse(&p, format!("bad {k}")))
        };
        let selected = get("selected")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|v| v.parse().map_err(|_| Error::parse(&p, format!("bad index {v:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        let pipeline = TrainedPipeline {
            policy: WeightingPolicy::new(num("lambda")?, num("n")? as usize, num("o")? as usize)?,
            split_seed: get("split_seed")?
                .parse()
                .map_err(|_| Error::parse(&p, "bad split_seed"))?,
            bank_checksum: get("bank_checksum")?.to_string(),
            boost,
            svm,
            selected,
        };
        pipeline.check_consistency()?;
        Ok(pipeline)
    }

    pub fn check_consistency(&self) -> Result<()> {
        if self.boost.bank_checksum != self.bank_checksum {
            return Err(Error::ChecksumMismatch {
                expected: self.bank_checksum.clone(),
                found: self.boost.bank_checksum.clone(),
            });
        }
        if self.boost.selected_features() != self.selected {
            return Err(Error::InvalidInput("selection does not match boost model".into()));
        }
        let want = selection_checksum(&self.bank_checksum, &self.selected);
        if self.svm.checksum != want {
            return Err(Error::ChecksumMismatch {
                expected: want,
                found: self.svm.checksum.clone(),
            });
        }
        Ok(())
    }
}

pub fn accuracy(predicted: &[i8], labels: &[i8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let ok = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    ok as f64 / labels.len() as f64
}

/// AdaBoost then SVM on `train`, reusing `boost`'s presorted columns (which
/// must come from `train.matrix`). With a validation set and a non-empty
/// `c_grid`, C is the grid value with the best validation accuracy (first
/// wins on ties).
pub fn train_pipeline_with(
    boost: &BoostTrainer,
    train: &FeatureSet,
    val: Option<&FeatureSet>,
    provenance: Option<&Provenance>,
    bank_checksum: &str,
    config: &TrainConfig,
) -> Result<(TrainedPipeline, TrainingReport)> {
    if boost.rows() != train.len() || boost.cols() != train.matrix.cols() {
        return Err(Error::DimensionMismatch(
            "boost trainer was built from a different matrix".into(),
        ));
    }
    if let Some(p) = provenance {
        p.check(train)?;
    }
    let labels = train.labels();
    if labels.contains(&0) {
        return Err(Error::InvalidInput("discarded segment in training set".into()));
    }
    let origins = train.origins();
    let policy = WeightingPolicy::from_origins(config.lambda, &origins)?;
    let g = sample_weights(&origins, &policy)?;

    let t0 = Instant::now();
    let boosted = boost.train(&labels, &g, config.features, bank_checksum)?;
    let boost_seconds = t0.elapsed().as_secs_f64();
    let selected = boosted.model.selected_features();
    let checksum = selection_checksum(bank_checksum, &selected);

    let t1 = Instant::now();
    let x = train.matrix.select_columns(&selected)?;
    let val_x = match val {
        Some(v) if !config.c_grid.is_empty() => Some((v.matrix.select_columns(&selected)?, v.labels())),
        _ => None,
    };
    let grid = match &val_x {
        Some(_) => config.c_grid.clone(),
        None => vec![config.svm.c],
    };
    let mut best: Option<(f64, f64, crate::svm::SvmReport)> = None;
    let mut c_scores = Vec::new();
    for c in grid {
        let params = SvmParams { c, ..config.svm.clone() };
        let report = train_weighted_svm(&x, &labels, &g, &params, &checksum)?;
        let score = match &val_x {
            Some((vx, vy)) => {
                let pred: Vec<i8> = report
                    .model
                    .decision_matrix(vx)?
                    .iter()
                    .map(|m| if *m > 0.0 { 1 } else { -1 })
                    .collect();
                accuracy(&pred, vy)
            }
            None => f64::NAN,
        };
        c_scores.push((c, score));
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, c, report));
        }
    }
    let svm_seconds = t1.elapsed().as_secs_f64();
    let (_, c, svm) = best.expect("grid is never empty");

    let report = TrainingReport {
        rounds: boosted.model.rounds(),
        distinct_features: selected.len(),
        epsilons: boosted.epsilons,
        early_stop: boosted.early_stop,
        svm_objective: svm.objective,
        svm_primal: svm.primal,
        svm_converged: svm.converged,
        c,
        c_scores,
        boost_seconds,
        svm_seconds,
    };
    let pipeline = TrainedPipeline {
        boost: boosted.model,
        svm: svm.model,
        selected,
        policy,
        bank_checksum: bank_checksum.to_string(),
        split_seed: provenance.map_or(0, |p| p.split_seed),
    };
    Ok((pipeline, report))
}

pub fn train_pipeline(
    train: &FeatureSet,
    val: Option<&FeatureSet>,
    provenance: Option<&Provenance>,
    bank_checksum: &str,
    config: &TrainConfig,
    exec: Execution,
) -> Result<(TrainedPipeline, TrainingReport)> {
    let boost = BoostTrainer::new(&train.matrix, exec)?;
    train_pipeline_with(&boost, train, val, provenance, bank_checksum, config)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub report: TrainingReport,
}

/// One train + validate per λ, sharing one presort of the training matrix.
pub fn lambda_sweep(
    train: &FeatureSet,
    val: &FeatureSet,
    provenance: Option<&Provenance>,
    bank_checksum: &str,
    lambdas: &[f64],
    config: &TrainConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    if val.is_empty() {
        return Err(Error::InvalidInput("empty validation set".into()));
    }
    if !val.origins().iter().any(|o| o.is_occluded()) {
        return Err(Error::InvalidInput(
            "validation set has no occluded samples".into(),
        ));
    }
    let boost = BoostTrainer::new(&train.matrix, exec)?;
    let val_labels = val.labels();
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = TrainConfig { lambda, ..config.clone() };
            let (p, report) = train_pipeline_with(&boost, train, Some(val), provenance, bank_checksum, &cfg)?;
            let acc = accuracy(&p.predict(&val.matrix)?, &val_labels);
            Ok(SweepRow {
                lambda,
                accuracy: acc,
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FeatureSweepRow {
    pub features: usize,
    pub accuracy: f64,
    pub report: TrainingReport,
}

/// One train per K in `ks` at the configured λ; accuracy is measured on
/// `eval`, wall time is the report's boost + SVM seconds.
#[allow(clippy::too_many_arguments)]
pub fn feature_sweep(
    train: &FeatureSet,
    val: Option<&FeatureSet>,
    eval: &FeatureSet,
    provenance: Option<&Provenance>,
    bank_checksum: &str,
    ks: &[usize],
    config: &TrainConfig,
    exec: Execution,
) -> Result<Vec<FeatureSweepRow>> {
    if eval.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let boost = BoostTrainer::new(&train.matrix, exec)?;
    let labels = eval.labels();
    ks.iter()
        .map(|&features| {
            let cfg = TrainConfig { features, ..config.clone() };
            let (p, report) = train_pipeline_with(&boost, train, val, provenance, bank_checksum, &cfg)?;
            Ok(FeatureSweepRow {
                features,
                accuracy: accuracy(&p.predict(&eval.matrix)?, &labels),
                report,
            })
        })
        .collect()
}
