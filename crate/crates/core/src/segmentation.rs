//! Fixed-length sampled windows over a video, window labeling, and
//! whole-video train/validation/test splits.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::corpus::{FrameLabel, Origin, VideoRecord};
use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentParams {
    pub segment_len: usize,
    /// Keep every k-th frame inside a window.
    pub sampling_rate: usize,
    /// Frames between the first frames of consecutive windows.
    pub stride: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            segment_len: 4,
            sampling_rate: 1,
            stride: 4,
        }
    }
}

impl SegmentParams {
    pub fn new(segment_len: usize, sampling_rate: usize, stride: usize) -> Result<Self> {
        let p = SegmentParams {
            segment_len,
            sampling_rate,
            stride,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_len < 2 || self.sampling_rate < 1 || self.stride < 1 {
            return Err(Error::InvalidInput(format!(
                "segment params {self:?}: need segment_len >= 2, sampling_rate >= 1, stride >= 1"
            )));
        }
        Ok(())
    }

    /// Source frames covered by one window.
    pub fn span(&self) -> usize {
        (self.segment_len - 1) * self.sampling_rate + 1
    }

    pub fn count(&self, length: usize) -> usize {
        if length < self.span() {
            0
        } else {
            (length - self.span()) / self.stride + 1
        }
    }
}

/// Windows starting at 0, stride, 2·stride, …; incomplete windows are dropped.
pub fn segment_indices(length: usize, params: &SegmentParams) -> Vec<Vec<usize>> {
    (0..params.count(length))
        .map(|k| {
            let start = k * params.stride;
            (0..params.segment_len)
                .map(|i| start + i * params.sampling_rate)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelMode {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentLabel {
    NonFall,
    Fall,
    Discarded,
}

impl SegmentLabel {
    /// +1 for fall, −1 for non-fall.
    pub fn sign(self) -> Option<i8> {
        match self {
            SegmentLabel::Fall => Some(1),
            SegmentLabel::NonFall => Some(-1),
            SegmentLabel::Discarded => None,
        }
    }
}

/// Pure windows keep their label. Mixed windows are dropped from training and
/// decided by majority in test mode, ties going to fall.
pub fn label_segment(window: &[usize], labels: &[FrameLabel], mode: LabelMode) -> SegmentLabel {
    let falls = window
        .iter()
        .filter(|&&i| labels[i] == FrameLabel::Fall)
        .count();
    let non = window.len() - falls;
    match (falls, non) {
        (_, 0) => SegmentLabel::Fall,
        (0, _) => SegmentLabel::NonFall,
        _ if mode == LabelMode::Train => SegmentLabel::Discarded,
        _ if falls >= non => SegmentLabel::Fall,
        _ => SegmentLabel::NonFall,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub video_id: String,
    pub frame_indices: Vec<usize>,
    pub label: SegmentLabel,
    pub origin: Origin,
}

/// Segments of one video, discarded windows removed.
pub fn segment_video(video: &VideoRecord, params: &SegmentParams, mode: LabelMode) -> Vec<Segment> {
    let labels = video.labels();
    segment_indices(video.len(), params)
        .into_iter()
        .filter_map(|w| {
            let label = label_segment(&w, &labels, mode);
            (label != SegmentLabel::Discarded).then(|| Segment {
                video_id: video.id().to_string(),
                frame_indices: w,
                label,
                origin: video.origin,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn label_mode(self) -> LabelMode {
        match self {
            Split::Train => LabelMode::Train,
            _ => LabelMode::Test,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

/// video id → split, ordered by id so the persisted file is stable.
pub type SplitAssignment = BTreeMap<String, Split>;

pub const SPLIT_FRACTIONS: (f64, f64) = (0.6, 0.2);

/// Shuffles the root (normal) videos with `seed` and assigns 60/20/20 by
/// position; occluded videos inherit their parent's split.
pub fn assign_splits<'a, I>(videos: I, seed: u64) -> Result<SplitAssignment>
where
    I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
{
    let videos: Vec<(&str, Option<&str>)> = videos.into_iter().collect();
    let mut roots: Vec<&str> = videos
        .iter()
        .filter(|(_, p)| p.is_none())
        .map(|(id, _)| *id)
        .collect();
    roots.sort_unstable();
    roots.shuffle(&mut rng(seed));
    let n = roots.len();
    let n_train = (n as f64 * SPLIT_FRACTIONS.0).round() as usize;
    let n_val = (n as f64 * SPLIT_FRACTIONS.1).round() as usize;
    let mut out = SplitAssignment::new();
    for (i, id) in roots.iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        out.insert(id.to_string(), split);
    }
    for (id, parent) in &videos {
        if let Some(p) = parent {
            let split = *out.get(*p).ok_or_else(|| Error::DanglingParent {
                id: id.to_string(),
                parent: p.to_string(),
            })?;
            out.insert(id.to_string(), split);
        }
    }
    Ok(out)
}

/// Every occluded video must share its parent's split.
pub fn check_split_hygiene<'a, I>(videos: I, splits: &SplitAssignment) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
{
    for (id, parent) in videos {
        let Some(parent) = parent else { continue };
        let (Some(a), Some(b)) = (splits.get(id), splits.get(parent)) else {
            return Err(Error::Contamination(format!(
                "video {id} or its parent {parent} has no split"
            )));
        };
        if a != b {
            return Err(Error::Contamination(format!(
                "video {id} is in {a} but its parent {parent} is in {b}"
            )));
        }
    }
    Ok(())
}

pub fn write_splits(path: &Path, splits: &SplitAssignment) -> Result<()> {
    let text: String = splits
        .iter()
        .map(|(id, s)| format!("{id}\t{s}\n"))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_splits(path: &Path) -> Result<SplitAssignment> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = SplitAssignment::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, split) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, format!("line {}: expected id<TAB>split", n + 1)))?;
        let split = split
            .parse()
            .map_err(|e| Error::parse(path, format!("line {}: {e}", n + 1)))?;
        out.insert(id.to_string(), split);
    }
    Ok(out)
}

/// Count of videos per split, for reports.
pub fn split_sizes(splits: &SplitAssignment) -> HashMap<Split, usize> {
    let mut out = HashMap::new();
    for s in splits.values() {
        *out.entry(*s).or_insert(0) += 1;
    }
    out
}
