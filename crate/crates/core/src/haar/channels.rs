use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::GrayImage;

use super::integral::IntegralImage;

/// The six images a window is reduced to before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    /// First frame of the window.
    Appearance,
    /// Mean absolute inter-frame difference.
    Delta,
    Up,
    Down,
    Left,
    Right,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Appearance,
        Channel::Delta,
        Channel::Up,
        Channel::Down,
        Channel::Left,
        Channel::Right,
    ];

    pub const DIRECTIONS: [Channel; 4] = [Channel::Up, Channel::Down, Channel::Left, Channel::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Appearance => "A",
            Channel::Delta => "D0",
            Channel::Up => "U",
            Channel::Down => "D",
            Channel::Left => "L",
            Channel::Right => "R",
        }
    }

    /// Pixel offset a 1 px move in this direction produces (y grows downward).
    pub fn motion(self) -> Option<(isize, isize)> {
        match self {
            Channel::Up => Some((0, -1)),
            Channel::Down => Some((0, 1)),
            Channel::Left => Some((-1, 0)),
            Channel::Right => Some((1, 0)),
            _ => None,
        }
    }

    pub fn is_direction(self) -> bool {
        self.motion().is_some()
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

/// Channel images of one window, kept as exact integer sums.
///
/// Appearance holds frame 0 directly. The motion channels hold the *sum* over
/// the `pairs` consecutive frame pairs; the channel value is that sum divided
/// by `pairs`. A direction channel S compares frame i with frame i+1 sampled
/// one pixel along S (edge pixels replicated), so it is small where the scene
/// moved in direction S.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    width: usize,
    height: usize,
    pairs: usize,
    raw: [Vec<u16>; 6],
}

impl ChannelSet {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Divisor that turns raw motion sums into per-pair means.
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn divisor(&self, ch: Channel) -> f32 {
        if ch == Channel::Appearance {
            1.0
        } else {
            self.pairs as f32
        }
    }

    pub fn raw(&self, ch: Channel) -> &[u16] {
        &self.raw[ch.index()]
    }

    pub fn value(&self, ch: Channel, x: usize, y: usize) -> f32 {
        self.raw[ch.index()][y * self.width + x] as f32 / self.divisor(ch)
    }

    pub fn integral(&self, ch: Channel) -> IntegralImage {
        IntegralImage::new(self.width, self.height, self.raw(ch))
    }

    pub fn integrals(&self) -> [IntegralImage; 6] {
        Channel::ALL.map(|c| self.integral(c))
    }
}

/// Appearance and motion channels of a window of ≥ 2 equally sized frames.
pub fn build_channels(window: &[&GrayImage]) -> Result<ChannelSet> {
    if window.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "window of {} frames, need at least 2",
            window.len()
        )));
    }
    if window.len() > 257 {
        return Err(Error::InvalidInput("window longer than 257 frames".into()));
    }
    let (w, h) = window[0].dims();
    if window.iter().any(|f| f.dims() != (w, h)) {
        return Err(Error::DimensionMismatch("window frames differ in size".into()));
    }
    let n = w * h;
    let mut raw: [Vec<u16>; 6] = std::array::from_fn(|_| vec![0u16; n]);
    raw[Channel::Appearance.index()]
        .iter_mut()
        .zip(window[0].as_raw())
        .for_each(|(d, s)| *d = *s as u16);

    for pair in window.windows(2) {
        let (cur, next) = (pair[0].as_raw(), pair[1].as_raw());
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let c = cur[i] as i16;
                raw[Channel::Delta.index()][i] += (next[i] as i16 - c).unsigned_abs();
                for dir in Channel::DIRECTIONS {
                    let (dx, dy) = dir.motion().unwrap();
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    raw[dir.index()][i] += (next[sy * w + sx] as i16 - c).unsigned_abs();
                }
            }
        }
    }
    Ok(ChannelSet {
        width: w,
        height: h,
        pairs: window.len() - 1,
        raw,
    })
}
