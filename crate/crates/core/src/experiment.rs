//! Dataset preparation shared by the CLI and the experiment harnesses:
//! whole-video splits, training-set augmentation, occlusion-included
//! validation/test sets, segmentation and feature extraction.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;

use crate::corpus::{Origin, VideoRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::haar::{extract_matrix, BankParams, FeatureSet, FilterBank};
use crate::occlusion::{augment_video, augment_video_constant, augment_video_with, OccluderPreset};
use crate::rng::{derive_seed, rng, seed_from_str};
use crate::segmentation::{
    assign_splits, read_splits, segment_video, write_splits, Segment, SegmentParams, Split, SplitAssignment,
};
use crate::trainer::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AugmentMode {
    None,
    #[default]
    Dynamic,
    Constant,
}

impl AugmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentMode::None => "none",
            AugmentMode::Dynamic => "dynamic",
            AugmentMode::Constant => "constant",
        }
    }
}

impl fmt::Display for AugmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmentMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(AugmentMode::None),
            "dynamic" => Ok(AugmentMode::Dynamic),
            "constant" => Ok(AugmentMode::Constant),
            _ => Err(format!("unknown augmentation {s:?} (dynamic|constant|none)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub segment: SegmentParams,
    pub bank: BankParams,
    pub split_seed: u64,
    pub augment_seed: u64,
    pub augment: AugmentMode,
    /// Synthetic occluded versions added per validation/test video when the
    /// corpus has no realistic occlusions for it.
    pub eval_variants: usize,
    pub eval_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            segment: SegmentParams::default(),
            bank: BankParams::default(),
            split_seed: 7,
            augment_seed: 11,
            augment: AugmentMode::Dynamic,
            eval_variants: 1,
            eval_seed: 13,
        }
    }
}

/// Videos of every split, before segmentation.
#[derive(Debug, Clone)]
pub struct VideoSplits {
    /// Training videos plus their augmentations.
    pub train: Vec<VideoRecord>,
    pub val_clean: Vec<VideoRecord>,
    pub val_occluded: Vec<VideoRecord>,
    pub test_clean: Vec<VideoRecord>,
    pub test_occluded: Vec<VideoRecord>,
    pub provenance: Provenance,
}

/// Per-video seed so a video's augmentation does not depend on corpus order.
pub fn video_seed(base: u64, id: &str) -> u64 {
    derive_seed(base, seed_from_str(id))
}

/// Occluded stand-ins for one evaluation video: `count` dynamic occlusions
/// with distinct, randomly chosen body parts.
pub fn eval_occlusions(video: &VideoRecord, count: usize, seed: u64) -> Result<Vec<VideoRecord>> {
    let (w, h) = video.frames.dims();
    let mut presets = OccluderPreset::all_for_frame(w, h);
    let s = video_seed(seed, video.id());
    let mut r = rng(s);
    let mut out = Vec::with_capacity(count);
    while out.len() < count && !presets.is_empty() {
        let pick = presets.choose(&mut r).expect("non-empty").clone();
        presets.retain(|p| p.part != pick.part);
        match augment_video_with(video, &[pick], s) {
            Ok(mut a) => out.append(&mut a.videos),
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Splits the corpus and builds the augmented/occluded video sets.
///
/// Normal videos are split 60/20/20 and occluded videos follow their parents.
/// Realistic occlusions are kept for validation/test only; validation/test
/// videos without one get `eval_variants` synthetic dynamic occlusions
/// instead. Training videos get the configured augmentation, reusing
/// augmentations already in the corpus when present; constant augmentation
/// produces as many variants per video as dynamic augmentation would.
pub fn build_video_splits(corpus: &[VideoRecord], cfg: &DatasetConfig) -> Result<VideoSplits> {
    let splits: SplitAssignment = assign_splits(
        corpus.iter().map(|v| (v.id(), v.parent_id.as_deref())),
        cfg.split_seed,
    )?;
    let mut parents = BTreeMap::new();
    let mut out = VideoSplits {
        train: Vec::new(),
        val_clean: Vec::new(),
        val_occluded: Vec::new(),
        test_clean: Vec::new(),
        test_occluded: Vec::new(),
        provenance: Provenance::default(),
    };
    let mut realistic: BTreeMap<&str, Vec<&VideoRecord>> = BTreeMap::new();
    let mut ingested: BTreeMap<&str, Vec<&VideoRecord>> = BTreeMap::new();
    let wanted = match cfg.augment {
        AugmentMode::None => None,
        AugmentMode::Dynamic => Some(Origin::DynamicOccluded),
        AugmentMode::Constant => Some(Origin::ConstantOccluded),
    };
    for v in corpus {
        if let Some(p) = &v.parent_id {
            if v.origin == Origin::RealisticOccluded {
                parents.insert(v.id().to_string(), p.clone());
                realistic.entry(p.as_str()).or_default().push(v);
            } else if Some(v.origin) == wanted && splits[p.as_str()] == Split::Train {
                ingested.entry(p.as_str()).or_default().push(v);
            }
        }
    }
    let mut all_splits = splits.clone();
    for v in corpus.iter().filter(|v| v.origin == Origin::Normal) {
        let split = splits[v.id()];
        match split {
            Split::Train => {
                out.train.push(v.clone());
                let seed = video_seed(cfg.augment_seed, v.id());
                let children = match cfg.augment {
                    _ if ingested.contains_key(v.id()) => ingested[v.id()].iter().map(|c| (*c).clone()).collect(),
                    AugmentMode::None => Vec::new(),
                    AugmentMode::Dynamic => augment_video(v, seed)?.videos,
                    AugmentMode::Constant => {
                        let n = augment_video(v, seed)?.videos.len();
                        augment_video_constant(v, seed, n)?
                    }
                };
                for c in children {
                    parents.insert(c.id().to_string(), v.id().to_string());
                    all_splits.insert(c.id().to_string(), Split::Train);
                    out.train.push(c);
                }
            }
            Split::Val | Split::Test => {
                let occluded = match realistic.get(v.id()) {
                    Some(r) => r.iter().map(|r| (*r).clone()).collect(),
                    None => {
                        let vs = eval_occlusions(v, cfg.eval_variants, cfg.eval_seed)?;
                        for c in &vs {
                            parents.insert(c.id().to_string(), v.id().to_string());
                            all_splits.insert(c.id().to_string(), split);
                        }
                        vs
                    }
                };
                let (clean, occ) = if split == Split::Val {
                    (&mut out.val_clean, &mut out.val_occluded)
                } else {
                    (&mut out.test_clean, &mut out.test_occluded)
                };
                clean.push(v.clone());
                occ.extend(occluded);
            }
        }
    }
    out.provenance = Provenance {
        splits: all_splits,
        parents,
        split_seed: cfg.split_seed,
    };
    Ok(out)
}

pub fn segment_videos(videos: &[VideoRecord], params: &SegmentParams, split: Split) -> Vec<Segment> {
    videos
        .iter()
        .flat_map(|v| segment_video(v, params, split.label_mode()))
        .collect()
}

/// Feature sets of every evaluation slice.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub bank: FilterBank,
    pub train: FeatureSet,
    pub val_clean: FeatureSet,
    pub val_occluded: FeatureSet,
    pub test_clean: FeatureSet,
    pub test_occluded: FeatureSet,
    pub provenance: Provenance,
}

const SLICES: [&str; 5] = ["train", "val_clean", "val_occluded", "test_clean", "test_occluded"];

impl PreparedData {
    /// `bank.txt`, `splits.tsv`, `provenance.tsv` and one feature file pair
    /// per slice under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bank = dir.join("bank.txt");
        fs::write(&bank, self.bank.to_text()).map_err(|e| Error::io(&bank, e))?;
        write_splits(&dir.join("splits.tsv"), &self.provenance.splits)?;
        let mut text = format!("#split_seed\t{}\n", self.provenance.split_seed);
        for (child, parent) in &self.provenance.parents {
            text.push_str(&format!("{child}\t{parent}\n"));
        }
        let prov = dir.join("provenance.tsv");
        fs::write(&prov, text).map_err(|e| Error::io(&prov, e))?;
        for (name, set) in SLICES.iter().zip(self.slices()) {
            set.write(dir, name)?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let bank_path = dir.join("bank.txt");
        let text = fs::read_to_string(&bank_path).map_err(|e| Error::io(&bank_path, e))?;
        let bank = FilterBank::from_text(&text).map_err(|e| Error::parse(&bank_path, e))?;
        let splits = read_splits(&dir.join("splits.tsv"))?;
        let prov_path = dir.join("provenance.tsv");
        let text = fs::read_to_string(&prov_path).map_err(|e| Error::io(&prov_path, e))?;
        let mut provenance = Provenance {
            splits,
            ..Provenance::default()
        };
        for line in text.lines() {
            let (a, b) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(&prov_path, format!("bad line {line:?}")))?;
            if a == "#split_seed" {
                provenance.split_seed = b.parse().map_err(|_| Error::parse(&prov_path, "bad split seed"))?;
            } else {
                provenance.parents.insert(a.to_string(), b.to_string());
            }
        }
        let mut sets = SLICES
            .iter()
            .map(|name| FeatureSet::read(dir, name))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let mut next = || sets.next().expect("five slices");
        let data = PreparedData {
            train: next(),
            val_clean: next(),
            val_occluded: next(),
            test_clean: next(),
            test_occluded: next(),
            provenance,
            bank,
        };
        for set in data.slices() {
            if set.matrix.cols() != data.bank.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{}: {} feature columns for a bank of {}",
                    dir.display(),
                    set.matrix.cols(),
                    data.bank.len()
                )));
            }
        }
        Ok(data)
    }

    fn slices(&self) -> [&FeatureSet; 5] {
        [&self.train, &self.val_clean, &self.val_occluded, &self.test_clean, &self.test_occluded]
    }

    /// Slice by name: the five stored slices plus `val_included` and
    /// `test_included`.
    pub fn slice(&self, name: &str) -> Result<FeatureSet> {
        match name {
            "train" => Ok(self.train.clone()),
            "val_clean" => Ok(self.val_clean.clone()),
            "val_occluded" => Ok(self.val_occluded.clone()),
            "val_included" => self.val_included(),
            "test_clean" => Ok(self.test_clean.clone()),
            "test_occluded" => Ok(self.test_occluded.clone()),
            "test_included" => self.test_included(),
            _ => Err(Error::InvalidInput(format!(
                "unknown slice {name:?} (train, val_clean, val_occluded, val_included, test_clean, test_occluded, test_included)"
            ))),
        }
    }

    /// Clean plus occluded validation segments.
    pub fn val_included(&self) -> Result<FeatureSet> {
        FeatureSet::concat(&[&self.val_clean, &self.val_occluded])
    }

    /// Clean plus occluded test segments.
    pub fn test_included(&self) -> Result<FeatureSet> {
        FeatureSet::concat(&[&self.test_clean, &self.test_occluded])
    }
}

pub fn extract_split(
    videos: &[VideoRecord],
    params: &SegmentParams,
    split: Split,
    bank: &FilterBank,
    exec: Execution,
) -> Result<FeatureSet> {
    let segments = segment_videos(videos, params, split);
    extract_matrix(videos, &segments, bank, exec)
}

pub fn prepare(corpus: &[VideoRecord], cfg: &DatasetConfig, exec: Execution) -> Result<PreparedData> {
    let bank = FilterBank::enumerate(&cfg.bank)?;
    let v = build_video_splits(corpus, cfg)?;
    let seg = &cfg.segment;
    Ok(PreparedData {
        train: extract_split(&v.train, seg, Split::Train, &bank, exec)?,
        val_clean: extract_split(&v.val_clean, seg, Split::Val, &bank, exec)?,
        val_occluded: extract_split(&v.val_occluded, seg, Split::Val, &bank, exec)?,
        test_clean: extract_split(&v.test_clean, seg, Split::Test, &bank, exec)?,
        test_occluded: extract_split(&v.test_occluded, seg, Split::Test, &bank, exec)?,
        provenance: v.provenance,
        bank,
    })
}
