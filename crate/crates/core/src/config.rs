//! Experiment configuration: `key = value` lines, `#` comments.
//!
//! Every key is optional; unknown keys are rejected so typos do not silently
//! fall back to defaults. [`ExperimentConfig::to_text`] writes a complete file
//! that parses back to the same configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{AugmentMode, DatasetConfig};
use crate::haar::BankParams;
use crate::segmentation::SegmentParams;
use crate::synth::SynthCorpusSpec;
use crate::trainer::{TrainConfig, C_GRID};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Manifest of the input corpus.
    pub corpus: Option<PathBuf>,
    /// Parent directory of timestamped run directories.
    pub runs_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub synth: SynthCorpusSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            runs_dir: PathBuf::from("runs"),
            dataset: DatasetConfig {
                bank: BankParams {
                    pos_step: 8,
                    ..BankParams::default()
                },
                ..DatasetConfig::default()
            },
            train: TrainConfig::default(),
            synth: SynthCorpusSpec::default(),
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {want}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, want))
}

fn list<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s, want))
        .collect()
}

/// `64x48` → (64, 48).
pub fn parse_resolution(value: &str) -> Option<(usize, usize)> {
    let (w, h) = value.split_once(['x', 'X'])?;
    Some((w.trim().parse().ok()?, h.trim().parse().ok()?))
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dataset;
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "runs_dir" => self.runs_dir = PathBuf::from(value),
            "lambda" => t.lambda = num(key, value, "a number in [0, 1]")?,
            "features" => t.features = num(key, value, "a positive integer")?,
            "svm_c" => {
                t.svm.c = num(key, value, "a positive number")?;
                t.c_grid.clear();
            }
            "c_grid" => t.c_grid = list(key, value, "comma-separated numbers")?,
            "svm_max_epochs" => t.svm.max_epochs = num(key, value, "an integer")?,
            "svm_seed" => t.svm.seed = num(key, value, "an integer")?,
            "split_seed" => d.split_seed = num(key, value, "an integer")?,
            "augment_seed" => d.augment_seed = num(key, value, "an integer")?,
            "eval_seed" => d.eval_seed = num(key, value, "an integer")?,
            "eval_variants" => d.eval_variants = num(key, value, "an integer")?,
            "augment" => d.augment = value.parse::<AugmentMode>().map_err(Error::Config)?,
            "segment_len" => d.segment.segment_len = num(key, value, "an integer")?,
            "sampling_rate" => d.segment.sampling_rate = num(key, value, "an integer")?,
            "stride" => d.segment.stride = num(key, value, "an integer")?,
            "resolution" => {
                let (w, h) = parse_resolution(value).ok_or_else(|| bad(key, value, "WIDTHxHEIGHT"))?;
                d.bank.width = w;
                d.bank.height = h;
            }
            "pos_step" => d.bank.pos_step = num(key, value, "an integer")?,
            "scales" => d.bank.scales = list(key, value, "comma-separated integers")?,
            "synth_videos" => s.videos = num(key, value, "an integer")?,
            "synth_resolution" => {
                let (w, h) = parse_resolution(value).ok_or_else(|| bad(key, value, "WIDTHxHEIGHT"))?;
                s.width = w;
                s.height = h;
            }
            "synth_frames" => s.frames = num(key, value, "an integer")?,
            "synth_fps" => s.fps = num(key, value, "a number")?,
            "synth_fall_fraction" => s.fall_fraction = num(key, value, "a number in [0, 1]")?,
            "synth_noise" => s.noise = num(key, value, "an integer 0-255")?,
            "synth_seed" => s.seed = num(key, value, "an integer")?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.segment.validate()?;
        if !(0.0..=1.0).contains(&self.train.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.train.lambda)));
        }
        if self.train.features == 0 {
            return Err(Error::Config("features must be >= 1".into()));
        }
        if self.train.svm.c <= 0.0 || self.train.c_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("SVM C values must be positive".into()));
        }
        if self.dataset.bank.pos_step == 0 || self.dataset.bank.scales.is_empty() {
            return Err(Error::Config("pos_step must be >= 1 and scales non-empty".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let t = &self.train;
        let s = &self.synth;
        let mut o = String::new();
        if let Some(c) = &self.corpus {
            let _ = writeln!(o, "corpus = {}", c.display());
        }
        let _ = writeln!(o, "runs_dir = {}", self.runs_dir.display());
        let _ = writeln!(o, "lambda = {}", t.lambda);
        let _ = writeln!(o, "features = {}", t.features);
        if t.c_grid.is_empty() {
            let _ = writeln!(o, "svm_c = {}", t.svm.c);
        } else {
            let _ = writeln!(o, "c_grid = {}", join(&t.c_grid));
        }
        let _ = writeln!(o, "svm_max_epochs = {}", t.svm.max_epochs);
        let _ = writeln!(o, "svm_seed = {}", t.svm.seed);
        let _ = writeln!(o, "split_seed = {}", d.split_seed);
        let _ = writeln!(o, "augment_seed = {}", d.augment_seed);
        let _ = writeln!(o, "eval_seed = {}", d.eval_seed);
        let _ = writeln!(o, "eval_variants = {}", d.eval_variants);
        let _ = writeln!(o, "augment = {}", d.augment);
        let _ = writeln!(o, "segment_len = {}", d.segment.segment_len);
        let _ = writeln!(o, "sampling_rate = {}", d.segment.sampling_rate);
        let _ = writeln!(o, "stride = {}", d.segment.stride);
        let _ = writeln!(o, "resolution = {}x{}", d.bank.width, d.bank.height);
        let _ = writeln!(o, "pos_step = {}", d.bank.pos_step);
        let _ = writeln!(o, "scales = {}", join(&d.bank.scales));
        let _ = writeln!(o, "synth_videos = {}", s.videos);
        let _ = writeln!(o, "synth_resolution = {}x{}", s.width, s.height);
        let _ = writeln!(o, "synth_frames = {}", s.frames);
        let _ = writeln!(o, "synth_fps = {}", s.fps);
        let _ = writeln!(o, "synth_fall_fraction = {}", s.fall_fraction);
        let _ = writeln!(o, "synth_noise = {}", s.noise);
        let _ = writeln!(o, "synth_seed = {}", s.seed);
        o
    }

    pub fn segment(&self) -> SegmentParams {
        self.dataset.segment
    }
}

/// The default C grid as text, for help strings.
pub fn default_c_grid() -> String {
    join(&C_GRID)
}
