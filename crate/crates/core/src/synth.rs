//! Synthetic desk-scale corpus: stick figures drawn as bright strokes on a
//! textured background, walking, sitting, bending, lying or falling. The
//! generator's own skeleton supplies perfect BODY-25 keypoints and exact fall
//! intervals.

use std::f32::consts::PI;

use rand::Rng as _;

use crate::corpus::{FallAnnotation, FrameSequence, Joint, KeypointTrack, Origin, Pose, VideoRecord, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::{derive_seed, rng, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpusSpec {
    pub videos: usize,
    pub width: usize,
    pub height: usize,
    pub fps: f32,
    pub frames: usize,
    pub fall_fraction: f64,
    /// Standing height of a subject in pixels, sampled uniformly.
    pub subject_height: (f32, f32),
    /// Walking speed in pixels per frame.
    pub walk_speed: (f32, f32),
    /// Frames a fall takes from upright to lying.
    pub fall_frames: (usize, usize),
    /// Amplitude of per-frame pixel noise.
    pub noise: u8,
    /// Amplitude of the static background texture.
    pub texture: u8,
    pub seed: u64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        SynthCorpusSpec {
            videos: 40,
            width: 64,
            height: 48,
            fps: 30.0,
            frames: 24,
            fall_fraction: 0.5,
            subject_height: (24.0, 34.0),
            walk_speed: (0.6, 1.6),
            fall_frames: (6, 10),
            noise: 6,
            texture: 30,
            seed: 1,
        }
    }
}

impl SynthCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synthetic corpus: {m}")));
        if self.videos == 0 {
            return bad("need at least one video");
        }
        if self.width < 16 || self.height < 16 {
            return bad("frames must be at least 16x16");
        }
        if !(0.0..=1.0).contains(&self.fall_fraction) {
            return bad("fall fraction outside [0, 1]");
        }
        if self.fall_frames.0 < 2 || self.fall_frames.0 > self.fall_frames.1 {
            return bad("bad fall duration range");
        }
        if self.frames < self.fall_frames.1 + 4 {
            return bad("videos too short for a fall");
        }
        if !(self.subject_height.0 > 4.0 && self.subject_height.0 <= self.subject_height.1) {
            return bad("bad subject height range");
        }
        if !(self.walk_speed.0 >= 0.0 && self.walk_speed.0 <= self.walk_speed.1) {
            return bad("bad walk speed range");
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        Ok(())
    }

    /// `round(videos · fall_fraction)`.
    pub fn fall_videos(&self) -> usize {
        (self.videos as f64 * self.fall_fraction).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    Walk,
    Sit,
    Bend,
    Lie,
    /// Controlled descent to the floor: crouch, then roll onto the side.
    LieDown,
    Fall,
}

impl Activity {
    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Walk => "walk",
            Activity::Sit => "sit",
            Activity::Bend => "bend",
            Activity::Lie => "lie",
            Activity::LieDown => "liedown",
            Activity::Fall => "fall",
        }
    }
}

/// BODY-25 limbs drawn as strokes.
const LIMBS: [(usize, usize); 14] = [
    (1, 8),
    (1, 2),
    (2, 3),
    (3, 4),
    (1, 5),
    (5, 6),
    (6, 7),
    (8, 9),
    (9, 10),
    (10, 11),
    (8, 12),
    (12, 13),
    (13, 14),
    (0, 1),
];

/// Skeleton in body units: x right, y up, feet at the origin, height 1.
#[derive(Clone, Copy)]
struct Body([(f32, f32); NUM_JOINTS]);

impl Body {
    fn standing(swing: f32, crouch: f32, bend: f32) -> Body {
        // crouch: 0 standing .. 1 seated (hips lowered, knees forward)
        // bend: forward torso rotation about the hips, radians
        let hip_y = 0.5 - 0.22 * crouch;
        let knee = (0.07 + 0.12 * crouch, 0.27 - 0.02 * crouch);
        let mut j = [(0.0f32, 0.0f32); NUM_JOINTS];
        j[8] = (0.0, hip_y);
        j[9] = (-0.05, hip_y);
        j[12] = (0.05, hip_y);
        j[10] = (knee.0 * 0.5 + 0.09 * swing - 0.03, knee.1);
        j[13] = (knee.0 * 0.5 - 0.09 * swing + 0.03, knee.1);
        j[11] = (0.12 * swing - 0.04, 0.02);
        j[14] = (-0.12 * swing + 0.04, 0.02);
        j[24] = (j[11].0 - 0.02, 0.0);
        j[22] = (j[11].0 + 0.05, 0.0);
        j[23] = (j[11].0 + 0.04, 0.01);
        j[21] = (j[14].0 - 0.02, 0.0);
        j[19] = (j[14].0 + 0.05, 0.0);
        j[20] = (j[14].0 + 0.04, 0.01);
        // upper body relative to the hips, rotated by `bend`
        let upper: [(usize, (f32, f32)); 13] = [
            (1, (0.0, 0.32)),
            (0, (0.0, 0.43)),
            (15, (-0.02, 0.45)),
            (16, (0.02, 0.45)),
            (17, (-0.04, 0.44)),
            (18, (0.04, 0.44)),
            (2, (-0.1, 0.3)),
            (5, (0.1, 0.3)),
            (3, (-0.12 - 0.06 * swing, 0.14)),
            (6, (0.12 + 0.06 * swing, 0.14)),
            (4, (-0.13 - 0.1 * swing, -0.02)),
            (7, (0.13 + 0.1 * swing, -0.02)),
            (8, (0.0, 0.0)),
        ];
        let (s, c) = bend.sin_cos();
        for (k, (x, y)) in upper {
            j[k] = (j[8].0 + c * x + s * y, j[8].1 - s * x + c * y);
        }
        Body(j)
    }

    fn lying(breath: f32, arm: f32) -> Body {
        let mut b = Body::standing(0.0, 0.0, 0.0);
        b.rotate(PI / 2.0);
        b.0[4].1 += 0.05 * arm;
        b.0[7].1 += 0.05 * arm;
        b.0[1].1 += 0.01 * breath;
        b
    }

    /// Rotates about the feet; positive angles tip the head to the right.
    fn rotate(&mut self, angle: f32) {
        let (s, c) = angle.sin_cos();
        for p in &mut self.0 {
            *p = (c * p.0 + s * p.1, -s * p.0 + c * p.1);
        }
    }

    fn mirror(&mut self) {
        for p in &mut self.0 {
            p.0 = -p.0;
        }
    }
}

struct Scene {
    background: Vec<f32>,
    width: usize,
    height: usize,
    subject: f32,
    noise: f32,
}

impl Scene {
    fn new(spec: &SynthCorpusSpec, rng: &mut Rng) -> Scene {
        let (w, h) = (spec.width, spec.height);
        let base = rng.random_range(50.0..120.0f32);
        let amp = spec.texture as f32;
        // a few low-frequency waves plus coarse blocks
        let waves: Vec<(f32, f32, f32, f32)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.05..0.4f32),
                    rng.random_range(0.05..0.4f32),
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.3..1.0f32),
                )
            })
            .collect();
        let bs = 8;
        let blocks: Vec<f32> = (0..w.div_ceil(bs) * h.div_ceil(bs))
            .map(|_| rng.random_range(-1.0..1.0f32))
            .collect();
        let mut background = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let wv: f32 = waves
                    .iter()
                    .map(|(fx, fy, ph, a)| a * (fx * x as f32 + fy * y as f32 + ph).sin())
                    .sum::<f32>()
                    / 2.0;
                let bl = blocks[(y / bs) * w.div_ceil(bs) + x / bs];
                background[y * w + x] = base + amp * (0.6 * wv + 0.4 * bl);
            }
        }
        Scene {
            background,
            width: w,
            height: h,
            subject: rng.random_range(170.0..245.0),
            noise: spec.noise as f32,
        }
    }

    fn render(&self, joints: &[(f32, f32); NUM_JOINTS], thickness: f32, head: f32, rng: &mut Rng) -> GrayImage {
        let mut buf = self.background.clone();
        let mut paint = |x: usize, y: usize, cover: f32| {
            let v = &mut buf[y * self.width + x];
            *v = *v * (1.0 - cover) + self.subject * cover;
        };
        let (w, h) = (self.width as f32, self.height as f32);
        for (a, b) in LIMBS {
            let (p, q) = (joints[a], joints[b]);
            let r = thickness / 2.0;
            let x0 = (p.0.min(q.0) - r - 1.0).floor().max(0.0) as usize;
            let x1 = (p.0.max(q.0) + r + 1.0).ceil().min(w - 1.0).max(0.0) as usize;
            let y0 = (p.1.min(q.1) - r - 1.0).floor().max(0.0) as usize;
            let y1 = (p.1.max(q.1) + r + 1.0).ceil().min(h - 1.0).max(0.0) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d = seg_dist((x as f32 + 0.5, y as f32 + 0.5), p, q);
                    let cover = (r + 0.5 - d).clamp(0.0, 1.0);
                    if cover > 0.0 {
                        paint(x, y, cover);
                    }
                }
            }
        }
        let c = joints[0];
        let x0 = (c.0 - head - 1.0).floor().max(0.0) as usize;
        let x1 = (c.0 + head + 1.0).ceil().min(w - 1.0).max(0.0) as usize;
        let y0 = (c.1 - head - 1.0).floor().max(0.0) as usize;
        let y1 = (c.1 + head + 1.0).ceil().min(h - 1.0).max(0.0) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f32 + 0.5 - c.0).powi(2) + (y as f32 + 0.5 - c.1).powi(2)).sqrt();
                let cover = (head + 0.5 - d).clamp(0.0, 1.0);
                if cover > 0.0 {
                    paint(x, y, cover);
                }
            }
        }
        let data = buf
            .iter()
            .map(|v| {
                let n = if self.noise > 0.0 {
                    rng.random_range(-self.noise..=self.noise)
                } else {
                    0.0
                };
                (v + n).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        GrayImage::from_raw(self.width, self.height, data).expect("sized buffer")
    }
}

fn seg_dist(p: (f32, f32), a: (f32, f32), b: (f32, f32)) -> f32 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

fn smoothstep(t: f32) -> f32 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// One generated video and the script it followed.
pub struct SynthVideo {
    pub record: VideoRecord,
    pub activity: Activity,
}

pub fn generate_video(spec: &SynthCorpusSpec, index: usize, activity: Activity) -> Result<SynthVideo> {
    spec.validate()?;
    let mut r = rng(derive_seed(spec.seed, index as u64));
    let scene = Scene::new(spec, &mut r);
    let (w, h) = (spec.width as f32, spec.height as f32);
    let n = spec.frames;
    let size = r.random_range(spec.subject_height.0..=spec.subject_height.1);
    let ground = h - r.random_range(2.0..(h * 0.12).max(3.0));
    let speed = r.random_range(spec.walk_speed.0..=spec.walk_speed.1);
    let dir = if r.random_bool(0.5) { 1.0 } else { -1.0 };
    let facing_left = r.random_bool(0.5);
    let thickness = (size / 12.0).clamp(1.5, 3.5);
    let head = (size * 0.07).max(1.5);
    let phase0 = r.random_range(0.0..2.0 * PI);
    let gait = r.random_range(0.25..0.45f32);

    // where the script changes state
    let fall_len = r.random_range(spec.fall_frames.0..=spec.fall_frames.1);
    let onset = r.random_range(2..=(n - fall_len - 2).max(2));
    let slow_len = r.random_range(fall_len + 4..=(fall_len + 10).min(n - 2).max(fall_len + 4));
    let slow_onset = r.random_range(1..=(n.saturating_sub(slow_len + 1)).max(1));
    let fall_dir = if r.random_bool(0.5) { 1.0 } else { -1.0 };
    let lie_len = size;
    // keep the whole motion inside the frame
    let travel = speed * n as f32;
    let margin = (size * 0.2).max(3.0);
    let span = match activity {
        Activity::Fall | Activity::LieDown => travel + lie_len,
        Activity::Lie => lie_len,
        _ => travel,
    };
    let lands = matches!(activity, Activity::Fall | Activity::LieDown);
    let lo = margin + if lands && fall_dir < 0.0 { lie_len } else { 0.0 };
    let hi = (w - margin - span).max(lo + 1.0);
    let mut x0 = r.random_range(lo..hi);
    if dir < 0.0 && activity != Activity::Lie {
        x0 += travel;
    }

    let mut frames = Vec::with_capacity(n);
    let mut poses = Vec::with_capacity(n);
    let mut feet_x = x0;
    for t in 0..n {
        let tf = t as f32;
        let swing = (phase0 + gait * tf).sin();
        let (mut body, moving) = match activity {
            Activity::Walk => (Body::standing(swing, 0.0, 0.0), true),
            Activity::Sit => {
                let s = smoothstep((tf - slow_onset as f32) / slow_len as f32);
                (Body::standing(swing * (1.0 - s), s, 0.0), s < 0.05)
            }
            Activity::Bend => {
                // bend forward and come back up
                let s = ((tf - slow_onset as f32) / slow_len as f32).clamp(0.0, 1.0);
                let b = (PI * s).sin() * 1.1;
                (Body::standing(0.0, 0.15 * (PI * s).sin(), b), s <= 0.0)
            }
            Activity::Lie => (Body::lying((0.7 * tf).sin(), (0.3 * tf + phase0).sin()), false),
            Activity::LieDown => {
                let s = ((tf - slow_onset as f32) / slow_len as f32).clamp(0.0, 1.0);
                let down = smoothstep(2.0 * s);
                let roll = smoothstep(2.0 * s - 1.0);
                let mut b = Body::standing(swing * (1.0 - down), 0.8 * down * (1.0 - roll), 0.0);
                b.rotate(fall_dir * (PI / 2.0) * roll);
                (b, s <= 0.0)
            }
            Activity::Fall => {
                if t < onset {
                    (Body::standing(swing, 0.0, 0.0), true)
                } else {
                    let s = ((tf - onset as f32 + 1.0) / fall_len as f32).min(1.0);
                    let mut b = Body::standing(swing * (1.0 - s), 0.3 * s, 0.0);
                    b.rotate(fall_dir * (PI / 2.0) * (0.4 * s + 0.6 * s * s));
                    (b, false)
                }
            }
        };
        if facing_left {
            body.mirror();
        }
        if activity == Activity::Lie && dir < 0.0 {
            body.mirror();
        }
        if moving && t > 0 {
            feet_x += dir * speed;
        }
        let joints: [(f32, f32); NUM_JOINTS] =
            std::array::from_fn(|k| (feet_x + body.0[k].0 * size, ground - body.0[k].1 * size));
        frames.push(scene.render(&joints, thickness, head, &mut r));
        let pose: Pose = std::array::from_fn(|k| {
            Joint::new(joints[k].0.clamp(0.0, w - 1.0), joints[k].1.clamp(0.0, h - 1.0), 1.0)
        });
        poses.push(pose);
    }
    let annotation = match activity {
        Activity::Fall => FallAnnotation::new(onset, (onset + fall_len - 1).min(n - 1))?,
        _ => FallAnnotation::none(),
    };
    let id = format!("synth_{:05}_{}", index, activity.as_str());
    let record = VideoRecord::new(
        FrameSequence::new(id, spec.fps, frames)?,
        Some(KeypointTrack::new(poses)),
        annotation,
        Origin::Normal,
        None,
    )?;
    Ok(SynthVideo { record, activity })
}

/// The first `fall_videos()` videos fall; the rest cycle through walk, sit,
/// bend, lie and lie-down.
pub fn generate_synth_corpus(spec: &SynthCorpusSpec) -> Result<Vec<VideoRecord>> {
    spec.validate()?;
    let falls = spec.fall_videos();
    let others = [Activity::Walk, Activity::Sit, Activity::Bend, Activity::Lie, Activity::LieDown];
    (0..spec.videos)
        .map(|i| {
            let activity = if i < falls { Activity::Fall } else { others[(i - falls) % others.len()] };
            generate_video(spec, i, activity).map(|v| v.record)
        })
        .collect()
}
