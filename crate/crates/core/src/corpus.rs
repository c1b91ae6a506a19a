//! Videos, BODY-25 keypoint tracks, fall annotations and the corpus manifest.
//!
//! A manifest is a tab-separated text file with one video per line:
//!
//! ```text
//! id  frames_dir  keypoints_dir|-  fall_start|-  fall_end|-  origin  parent_id|-
//! ```
//!
//! Relative directories are resolved against the manifest's own directory.
//! Frame directories hold binary PGM files `frame_000001.pgm` upward; keypoint
//! directories hold one pose-estimator JSON file per frame.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::GrayImage;

pub const NUM_JOINTS: usize = 25;

/// Joints at or below this confidence are treated as missing.
pub const KEYPOINT_CONFIDENCE_THRESHOLD: f32 = 0.1;

pub const MIN_FRAMES: usize = 4;

pub const DEFAULT_FPS: f32 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Joint {
    pub x: f32,
    pub y: f32,
    pub c: f32,
}

impl Joint {
    pub fn new(x: f32, y: f32, c: f32) -> Self {
        Joint { x, y, c }
    }

    pub fn is_visible(&self) -> bool {
        self.c > KEYPOINT_CONFIDENCE_THRESHOLD
    }
}

/// One frame of BODY-25 joints.
pub type Pose = [Joint; NUM_JOINTS];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointTrack {
    poses: Vec<Pose>,
}

impl KeypointTrack {
    pub fn new(poses: Vec<Pose>) -> Self {
        KeypointTrack { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn pose(&self, frame: usize) -> &Pose {
        &self.poses[frame]
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    id: String,
    fps: f32,
    frames: Vec<GrayImage>,
}

impl FrameSequence {
    pub fn new(id: impl Into<String>, fps: f32, frames: Vec<GrayImage>) -> Result<Self> {
        let id = id.into();
        if frames.len() < MIN_FRAMES {
            return Err(Error::InvalidInput(format!(
                "video {id}: {} frames, need at least {MIN_FRAMES}",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != dims) {
            return Err(Error::DimensionMismatch(format!(
                "video {id}: frame {i} is {}x{}, frame 0 is {}x{}",
                f.width(),
                f.height(),
                dims.0,
                dims.1
            )));
        }
        Ok(FrameSequence { id, fps, frames })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub(crate) fn with_frames(&self, id: String, frames: Vec<GrayImage>) -> Self {
        FrameSequence {
            id,
            fps: self.fps,
            frames,
        }
    }
}

/// Inclusive fall interval, or none for a video without a fall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FallAnnotation {
    interval: Option<(usize, usize)>,
}

impl FallAnnotation {
    pub fn none() -> Self {
        FallAnnotation { interval: None }
    }

    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInput(format!(
                "fall_start {start} after fall_end {end}"
            )));
        }
        Ok(FallAnnotation {
            interval: Some((start, end)),
        })
    }

    pub fn interval(&self) -> Option<(usize, usize)> {
        self.interval
    }

    pub fn validate(&self, length: usize) -> Result<()> {
        match self.interval {
            Some((_, end)) if end >= length => Err(Error::OutOfBounds(format!(
                "fall interval ends at {end}, video has {length} frames"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Normal,
    DynamicOccluded,
    ConstantOccluded,
    RealisticOccluded,
}

impl Origin {
    pub const ALL: [Origin; 4] = [
        Origin::Normal,
        Origin::DynamicOccluded,
        Origin::ConstantOccluded,
        Origin::RealisticOccluded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Normal => "normal",
            Origin::DynamicOccluded => "dynamic_occluded",
            Origin::ConstantOccluded => "constant_occluded",
            Origin::RealisticOccluded => "realistic_occluded",
        }
    }

    pub fn is_occluded(self) -> bool {
        self != Origin::Normal
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Origin::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown origin {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameLabel {
    NonFall,
    Fall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub frames: FrameSequence,
    pub keypoints: Option<KeypointTrack>,
    pub annotation: FallAnnotation,
    pub origin: Origin,
    pub parent_id: Option<String>,
}

impl VideoRecord {
    pub fn new(
        frames: FrameSequence,
        keypoints: Option<KeypointTrack>,
        annotation: FallAnnotation,
        origin: Origin,
        parent_id: Option<String>,
    ) -> Result<Self> {
        if (origin == Origin::Normal) != parent_id.is_none() {
            return Err(Error::InvalidInput(format!(
                "video {}: origin {origin} with parent {parent_id:?}",
                frames.id()
            )));
        }
        if let Some(kp) = &keypoints {
            if kp.len() != frames.len() {
                return Err(Error::FrameCountMismatch {
                    expected: frames.len(),
                    found: kp.len(),
                });
            }
        }
        annotation.validate(frames.len())?;
        Ok(VideoRecord {
            frames,
            keypoints,
            annotation,
            origin,
            parent_id,
        })
    }

    pub fn id(&self) -> &str {
        self.frames.id()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn labels(&self) -> Vec<FrameLabel> {
        // validated on construction
        frame_labels(&self.annotation, self.len()).expect("annotation validated")
    }

    /// Writes frames (and keypoints if present) below `root/<id>/` and returns
    /// the descriptor pointing at them.
    pub fn write_to(&self, root: &Path) -> Result<VideoDescriptor> {
        let dir = root.join(self.id());
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
        for (i, f) in self.frames.frames().iter().enumerate() {
            f.write_pgm(&frames_dir.join(frame_file_name(i)))?;
        }
        let keypoints_dir = match &self.keypoints {
            Some(track) => {
                let kp_dir = dir.join("keypoints");
                write_keypoints(&kp_dir, track)?;
                Some(kp_dir)
            }
            None => None,
        };
        Ok(VideoDescriptor {
            id: self.id().to_string(),
            frames_dir,
            keypoints_dir,
            annotation: self.annotation,
            origin: self.origin,
            parent_id: self.parent_id.clone(),
        })
    }
}

/// One manifest line. Frames are not decoded until [`VideoDescriptor::load`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VideoDescriptor {
    pub id: String,
    pub frames_dir: PathBuf,
    pub keypoints_dir: Option<PathBuf>,
    pub annotation: FallAnnotation,
    pub origin: Origin,
    pub parent_id: Option<String>,
}

impl VideoDescriptor {
    pub fn load(&self) -> Result<VideoRecord> {
        let frames = load_frames(&self.frames_dir)?;
        let frames = FrameSequence::new(self.id.clone(), DEFAULT_FPS, frames)?;
        let keypoints = match &self.keypoints_dir {
            Some(dir) => Some(load_keypoints(dir, frames.len())?),
            None => None,
        };
        VideoRecord::new(
            frames,
            keypoints,
            self.annotation,
            self.origin,
            self.parent_id.clone(),
        )
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{:06}.pgm", index + 1)
}

fn sorted_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(suffix))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_frames(dir: &Path) -> Result<Vec<GrayImage>> {
    sorted_files(dir, ".pgm")?
        .iter()
        .map(|p| GrayImage::read_pgm(p))
        .collect()
}

pub fn load_manifest(path: &Path) -> Result<Vec<VideoDescriptor>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base, path)
}

fn parse_manifest(text: &str, base: &Path, path: &Path) -> Result<Vec<VideoDescriptor>> {
    let bad = |line: usize, reason: String| Error::ManifestLine {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let opt = |s: &str| (s != "-").then(|| s.to_string());
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 7 {
            return Err(bad(line_no, format!("expected 7 columns, found {}", cols.len())));
        }
        let index = |s: &str| -> Result<Option<usize>> {
            match opt(s) {
                None => Ok(None),
                Some(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| bad(line_no, format!("bad frame index {v:?}"))),
            }
        };
        let annotation = match (index(cols[3])?, index(cols[4])?) {
            (None, None) => FallAnnotation::none(),
            (Some(s), Some(e)) => {
                FallAnnotation::new(s, e).map_err(|e| bad(line_no, e.to_string()))?
            }
            _ => return Err(bad(line_no, "fall_start and fall_end must both be set".into())),
        };
        let origin: Origin = cols[5].parse().map_err(|e| bad(line_no, e))?;
        let parent_id = opt(cols[6]);
        if (origin == Origin::Normal) != parent_id.is_none() {
            return Err(bad(
                line_no,
                "normal videos have no parent; occluded videos need one".into(),
            ));
        }
        if cols[0].is_empty() {
            return Err(bad(line_no, "empty id".into()));
        }
        out.push(VideoDescriptor {
            id: cols[0].to_string(),
            frames_dir: base.join(cols[1]),
            keypoints_dir: opt(cols[2]).map(|p| base.join(p)),
            annotation,
            origin,
            parent_id,
        });
    }
    let mut ids = HashSet::new();
    for d in &out {
        if !ids.insert(d.id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate video id {}", d.id)));
        }
    }
    for d in &out {
        if let Some(p) = &d.parent_id {
            if !ids.contains(p.as_str()) {
                return Err(Error::DanglingParent {
                    id: d.id.clone(),
                    parent: p.clone(),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, videos: &[VideoDescriptor]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let rel = |p: &Path| -> String {
        p.strip_prefix(base)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    };
    let dash = |s: Option<String>| s.unwrap_or_else(|| "-".to_string());
    let mut text = String::new();
    for v in videos {
        let (start, end) = match v.annotation.interval() {
            Some((s, e)) => (s.to_string(), e.to_string()),
            None => ("-".into(), "-".into()),
        };
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            v.id,
            rel(&v.frames_dir),
            dash(v.keypoints_dir.as_deref().map(rel)),
            start,
            end,
            v.origin,
            dash(v.parent_id.clone()),
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Decodes every listed video.
pub fn load_corpus(videos: &[VideoDescriptor], exec: Execution) -> Result<Vec<VideoRecord>> {
    exec.map_slice(videos, |d| d.load()).into_iter().collect()
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PoseFile {
    #[serde(default)]
    people: Vec<PosePerson>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PosePerson {
    #[serde(default)]
    pose_keypoints_2d: Vec<f32>,
}

/// Parses one pose-estimator frame file. Picks the person with the highest
/// summed confidence; no person yields an all-missing pose.
pub fn parse_pose_json(text: &str) -> std::result::Result<Pose, String> {
    let file: PoseFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut best: Option<(f32, Pose)> = None;
    for (i, person) in file.people.iter().enumerate() {
        let flat = &person.pose_keypoints_2d;
        if flat.len() != NUM_JOINTS * 3 {
            return Err(format!(
                "person {i}: expected {} keypoint values, found {}",
                NUM_JOINTS * 3,
                flat.len()
            ));
        }
        let mut pose = [Joint::default(); NUM_JOINTS];
        for (j, t) in flat.chunks_exact(3).enumerate() {
            pose[j] = Joint::new(t[0], t[1], t[2]);
        }
        let total: f32 = pose.iter().map(|j| j.c).sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, pose));
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or([Joint::default(); NUM_JOINTS]))
}

pub fn load_keypoints(dir: &Path, frame_count: usize) -> Result<KeypointTrack> {
    let files = sorted_files(dir, ".json")?;
    if files.len() != frame_count {
        return Err(Error::FrameCountMismatch {
            expected: frame_count,
            found: files.len(),
        });
    }
    let poses = files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_pose_json(&text).map_err(|r| Error::parse(p, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KeypointTrack::new(poses))
}

pub fn pose_to_json(pose: &Pose) -> String {
    let flat: Vec<f32> = pose.iter().flat_map(|j| [j.x, j.y, j.c]).collect();
    let file = PoseFile {
        people: vec![PosePerson {
            pose_keypoints_2d: flat,
        }],
    };
    serde_json::to_string(&file).expect("plain data serializes")
}

pub fn write_keypoints(dir: &Path, track: &KeypointTrack) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, pose) in track.poses().iter().enumerate() {
        let path = dir.join(format!("frame_{:06}_keypoints.json", i + 1));
        fs::write(&path, pose_to_json(pose)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Frames inside the inclusive fall interval are `Fall`, all others `NonFall`.
pub fn frame_labels(annotation: &FallAnnotation, length: usize) -> Result<Vec<FrameLabel>> {
    annotation.validate(length)?;
    Ok((0..length)
        .map(|i| match annotation.interval() {
            Some((s, e)) if (s..=e).contains(&i) => FrameLabel::Fall,
            _ => FrameLabel::NonFall,
        })
        .collect())
}
