//! Synthetic occluders: keypoint-anchored rectangles that follow a body part
//! through the video, and static random rectangles for the constant baseline.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::corpus::{KeypointTrack, Origin, VideoRecord, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::{derive_seed, rng};

pub const DEFAULT_PADDING_FRACTION: f32 = 0.05;
pub const DEFAULT_MIN_SIDE: f32 = 8.0;

/// Relative size range of a constant occluder, per image dimension.
pub const CONSTANT_SIZE_RANGE: (f32, f32) = (0.15, 0.35);

/// Body parts covered by the ten dynamic occluders, in generation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyPart {
    BothLegs,
    HeadNeck,
    TorsoAndHands,
    Torso,
    RightArm,
    LeftArm,
    RightLeg,
    LeftLeg,
    RightSide,
    LeftSide,
}

impl BodyPart {
    pub const ALL: [BodyPart; 10] = [
        BodyPart::BothLegs,
        BodyPart::HeadNeck,
        BodyPart::TorsoAndHands,
        BodyPart::Torso,
        BodyPart::RightArm,
        BodyPart::LeftArm,
        BodyPart::RightLeg,
        BodyPart::LeftLeg,
        BodyPart::RightSide,
        BodyPart::LeftSide,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BodyPart::BothLegs => "both_legs",
            BodyPart::HeadNeck => "head_neck",
            BodyPart::TorsoAndHands => "torso_and_hands",
            BodyPart::Torso => "torso",
            BodyPart::RightArm => "right_arm",
            BodyPart::LeftArm => "left_arm",
            BodyPart::RightLeg => "right_leg",
            BodyPart::LeftLeg => "left_leg",
            BodyPart::RightSide => "right_side",
            BodyPart::LeftSide => "left_side",
        }
    }

    /// BODY-25 joint indices of the part.
    pub fn joints(self) -> &'static [usize] {
        match self {
            BodyPart::BothLegs => &[9, 10, 11, 12, 13, 14, 19, 20, 21, 22, 23, 24],
            BodyPart::HeadNeck => &[0, 1, 15, 16, 17, 18],
            BodyPart::TorsoAndHands => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 12],
            BodyPart::Torso => &[1, 2, 5, 8, 9, 12],
            BodyPart::RightArm => &[2, 3, 4],
            BodyPart::LeftArm => &[5, 6, 7],
            BodyPart::RightLeg => &[9, 10, 11, 22, 23, 24],
            BodyPart::LeftLeg => &[12, 13, 14, 19, 20, 21],
            BodyPart::RightSide => &[0, 1, 2, 3, 4, 8, 9, 10, 11, 15, 17, 22, 23, 24],
            BodyPart::LeftSide => &[0, 1, 5, 6, 7, 8, 12, 13, 14, 16, 18, 19, 20, 21],
        }
    }

    fn index(self) -> u64 {
        BodyPart::ALL.iter().position(|p| *p == self).unwrap() as u64
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BodyPart {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        BodyPart::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown body part {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccluderPreset {
    pub part: BodyPart,
    pub joints: Vec<usize>,
    /// Pixels added on every side of the joint bounding box.
    pub padding: f32,
    pub min_side: f32,
}

impl OccluderPreset {
    pub fn new(part: BodyPart, padding: f32, min_side: f32) -> Result<Self> {
        let preset = OccluderPreset {
            part,
            joints: part.joints().to_vec(),
            padding,
            min_side,
        };
        preset.validate()?;
        Ok(preset)
    }

    /// Default geometry for a `width × height` video: padding is 5% of the
    /// image diagonal, minimum side 8 px.
    pub fn for_frame(part: BodyPart, width: usize, height: usize) -> Self {
        let diag = ((width * width + height * height) as f32).sqrt();
        OccluderPreset {
            part,
            joints: part.joints().to_vec(),
            padding: DEFAULT_PADDING_FRACTION * diag,
            min_side: DEFAULT_MIN_SIDE,
        }
    }

    pub fn all_for_frame(width: usize, height: usize) -> Vec<Self> {
        BodyPart::ALL
            .iter()
            .map(|p| Self::for_frame(*p, width, height))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() || self.joints.iter().any(|j| *j >= NUM_JOINTS) {
            return Err(Error::InvalidInput(format!(
                "preset {}: joints must be a non-empty subset of 0..{NUM_JOINTS}",
                self.part
            )));
        }
        if !(self.padding >= 0.0) || !(self.min_side >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "preset {}: padding {} / min_side {} out of range",
                self.part, self.padding, self.min_side
            )));
        }
        Ok(())
    }
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
}

/// Per-frame occluder rectangles plus one fill level for the whole video.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderTrack {
    pub rects: Vec<Option<Rect>>,
    pub fill: u8,
}

impl OccluderTrack {
    pub fn render(&self, frames: &[GrayImage]) -> Vec<GrayImage> {
        frames
            .iter()
            .zip(&self.rects)
            .map(|(f, r)| {
                let mut out = f.clone();
                if let Some(r) = r {
                    out.fill_box(r.x0, r.y0, r.x1, r.y1, self.fill);
                }
                out
            })
            .collect()
    }
}

fn expand_axis(lo: f32, hi: f32, min_side: f32) -> (f32, f32) {
    if hi - lo >= min_side {
        (lo, hi)
    } else {
        let c = 0.5 * (lo + hi);
        (c - 0.5 * min_side, c + 0.5 * min_side)
    }
}

fn clamp_rect(x0: f32, y0: f32, x1: f32, y1: f32, (w, h): (usize, usize)) -> Rect {
    let cx = |v: f32| v.clamp(0.0, w as f32) as usize;
    let cy = |v: f32| v.clamp(0.0, h as f32) as usize;
    let (x0, x1) = (cx(x0.floor()), cx(x1.ceil()));
    let (y0, y1) = (cy(y0.floor()), cy(y1.ceil()));
    Rect::new(x0, y0, x1.max(x0), y1.max(y0))
}

/// Occluder rectangle for one frame: bounding box of the preset's visible
/// joints, padded, grown to `min_side`, clamped to `bounds`. Falls back to
/// `last_rect` when none of the joints is visible.
pub fn occluder_rect(
    track: &KeypointTrack,
    preset: &OccluderPreset,
    frame: usize,
    last_rect: Option<Rect>,
    bounds: (usize, usize),
) -> Option<Rect> {
    let pose = track.pose(frame);
    let mut any = false;
    let (mut x0, mut y0, mut x1, mut y1) = (f32::MAX, f32::MAX, f32::MIN, f32::MIN);
    for j in preset.joints.iter().map(|&j| pose[j]).filter(|j| j.is_visible()) {
        any = true;
        x0 = x0.min(j.x);
        y0 = y0.min(j.y);
        x1 = x1.max(j.x);
        y1 = y1.max(j.y);
    }
    if !any {
        return last_rect;
    }
    let p = preset.padding;
    let (x0, x1) = expand_axis(x0 - p, x1 + p, preset.min_side);
    let (y0, y1) = expand_axis(y0 - p, y1 + p, preset.min_side);
    Some(clamp_rect(x0, y0, x1, y1, bounds))
}

/// Rectangles for every frame with the hold-last policy applied.
pub fn occluder_rects(
    track: &KeypointTrack,
    preset: &OccluderPreset,
    bounds: (usize, usize),
) -> Vec<Option<Rect>> {
    let mut last = None;
    (0..track.len())
        .map(|f| {
            last = occluder_rect(track, preset, f, last, bounds);
            last
        })
        .collect()
}

/// Seeds one part's occluder; presets of the same video get distinct fills.
fn part_seed(seed: u64, part: BodyPart) -> u64 {
    derive_seed(seed, 0x0CC1_0000 + part.index())
}

pub fn dynamic_child_id(parent: &str, part: BodyPart) -> String {
    format!("{parent}__{part}")
}

fn occluded_child(
    video: &VideoRecord,
    id: String,
    frames: Vec<GrayImage>,
    origin: Origin,
) -> Result<VideoRecord> {
    VideoRecord::new(
        video.frames.with_frames(id, frames),
        video.keypoints.clone(),
        video.annotation,
        origin,
        Some(video.id().to_string()),
    )
}

fn require_normal(video: &VideoRecord) -> Result<()> {
    if video.origin != Origin::Normal {
        return Err(Error::InvalidInput(format!(
            "video {} is {}, occlusions are generated from normal videos",
            video.id(),
            video.origin
        )));
    }
    Ok(())
}

/// Computes the occluder track of one preset without rendering it.
pub fn dynamic_occluder_track(
    video: &VideoRecord,
    preset: &OccluderPreset,
    seed: u64,
) -> Result<OccluderTrack> {
    preset.validate()?;
    let track = video.keypoints.as_ref().ok_or_else(|| {
        Error::InvalidInput(format!("video {} has no keypoints", video.id()))
    })?;
    let rects = occluder_rects(track, preset, video.frames.dims());
    if rects.iter().all(|r| r.is_none()) {
        return Err(Error::Degenerate(format!(
            "video {}: no {} joint is ever visible",
            video.id(),
            preset.part
        )));
    }
    let fill = rng(part_seed(seed, preset.part)).random_range(0..=255u8);
    Ok(OccluderTrack { rects, fill })
}

/// Draws one moving occluder over the body part named by `preset`.
pub fn apply_dynamic_occlusion(
    video: &VideoRecord,
    preset: &OccluderPreset,
    seed: u64,
) -> Result<VideoRecord> {
    require_normal(video)?;
    let occluder = dynamic_occluder_track(video, preset, seed)?;
    let frames = occluder.render(video.frames.frames());
    occluded_child(
        video,
        dynamic_child_id(video.id(), preset.part),
        frames,
        Origin::DynamicOccluded,
    )
}

#[derive(Debug, Clone)]
pub struct Augmentation {
    pub videos: Vec<VideoRecord>,
    /// Presets that produced no video, with the reason.
    pub omitted: Vec<(BodyPart, String)>,
}

/// The ten dynamic occlusions of a video, using the default preset geometry.
pub fn augment_video(video: &VideoRecord, seed: u64) -> Result<Augmentation> {
    let (w, h) = video.frames.dims();
    augment_video_with(video, &OccluderPreset::all_for_frame(w, h), seed)
}

pub fn augment_video_with(
    video: &VideoRecord,
    presets: &[OccluderPreset],
    seed: u64,
) -> Result<Augmentation> {
    require_normal(video)?;
    if video.keypoints.is_none() {
        return Err(Error::InvalidInput(format!(
            "video {} has no keypoints",
            video.id()
        )));
    }
    let mut out = Augmentation {
        videos: Vec::with_capacity(presets.len()),
        omitted: Vec::new(),
    };
    for preset in presets {
        match apply_dynamic_occlusion(video, preset, seed) {
            Ok(v) => out.videos.push(v),
            Err(Error::Degenerate(reason)) => out.omitted.push((preset.part, reason)),
            Err(e) => return Err(e),
        }
    }
    if out.videos.is_empty() {
        return Err(Error::Degenerate(format!(
            "video {}: no occluder could be placed",
            video.id()
        )));
    }
    Ok(out)
}

/// Static rectangle at a seeded random location; each side spans 15–35% of
/// the corresponding image dimension.
pub fn constant_occluder(dims: (usize, usize), seed: u64) -> (Rect, u8) {
    let (w, h) = dims;
    let mut r = rng(derive_seed(seed, 0xC0_57A7));
    let (lo, hi) = CONSTANT_SIZE_RANGE;
    let rw = ((r.random_range(lo..=hi) * w as f32).round() as usize).clamp(1, w);
    let rh = ((r.random_range(lo..=hi) * h as f32).round() as usize).clamp(1, h);
    let x0 = r.random_range(0..=w - rw);
    let y0 = r.random_range(0..=h - rh);
    let fill = r.random_range(0..=255u8);
    (Rect::new(x0, y0, x0 + rw, y0 + rh), fill)
}

fn constant_with_id(video: &VideoRecord, seed: u64, id: String) -> Result<VideoRecord> {
    require_normal(video)?;
    let (rect, fill) = constant_occluder(video.frames.dims(), seed);
    let track = OccluderTrack {
        rects: vec![Some(rect); video.len()],
        fill,
    };
    let frames = track.render(video.frames.frames());
    occluded_child(video, id, frames, Origin::ConstantOccluded)
}

pub fn apply_constant_occlusion(video: &VideoRecord, seed: u64) -> Result<VideoRecord> {
    let id = format!("{}__constant_{seed:016x}", video.id());
    constant_with_id(video, seed, id)
}

/// `count` constant-occlusion variants with ids `<parent>__constant<i>`.
pub fn augment_video_constant(
    video: &VideoRecord,
    seed: u64,
    count: usize,
) -> Result<Vec<VideoRecord>> {
    (0..count)
        .map(|i| {
            constant_with_id(
                video,
                derive_seed(seed, i as u64),
                format!("{}__constant{i:02}", video.id()),
            )
        })
        .collect()
}
