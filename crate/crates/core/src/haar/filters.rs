use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::channels::{Channel, ChannelSet};
use super::integral::IntegralImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    SingleRectSum,
    /// left half − right half
    TwoRectH,
    /// top half − bottom half
    TwoRectV,
    /// 2·middle third − outer thirds, horizontally
    ThreeRectH,
    ThreeRectV,
    /// main diagonal quadrants − anti-diagonal quadrants
    FourRect,
    /// sum(Δ) − sum(S) over the rect, S a direction channel
    MotionDirection,
}

impl FilterKind {
    pub const ALL: [FilterKind; 7] = [
        FilterKind::SingleRectSum,
        FilterKind::TwoRectH,
        FilterKind::TwoRectV,
        FilterKind::ThreeRectH,
        FilterKind::ThreeRectV,
        FilterKind::FourRect,
        FilterKind::MotionDirection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::SingleRectSum => "single_rect_sum",
            FilterKind::TwoRectH => "two_rect_h",
            FilterKind::TwoRectV => "two_rect_v",
            FilterKind::ThreeRectH => "three_rect_h",
            FilterKind::ThreeRectV => "three_rect_v",
            FilterKind::FourRect => "four_rect",
            FilterKind::MotionDirection => "motion_direction",
        }
    }

    /// Width and height divisors the sub-rectangles need.
    fn divisors(self) -> (usize, usize) {
        match self {
            FilterKind::TwoRectH => (2, 1),
            FilterKind::TwoRectV => (1, 2),
            FilterKind::ThreeRectH => (3, 1),
            FilterKind::ThreeRectV => (1, 3),
            FilterKind::FourRect => (2, 2),
            FilterKind::SingleRectSum | FilterKind::MotionDirection => (1, 1),
        }
    }

    pub fn applies_to(self, ch: Channel) -> bool {
        self != FilterKind::MotionDirection || ch.is_direction()
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown filter kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FilterSpec {
    pub channel: Channel,
    pub kind: FilterKind,
    pub x: u16,
    pub y: u16,
    pub w: u16,
    pub h: u16,
}

impl FilterSpec {
    pub fn new(channel: Channel, kind: FilterKind, x: usize, y: usize, w: usize, h: usize) -> Self {
        FilterSpec {
            channel,
            kind,
            x: x as u16,
            y: y as u16,
            w: w as u16,
            h: h as u16,
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let (x, y, w, h) = self.rect();
        let (dw, dh) = self.kind.divisors();
        let bad = |why: &str| Err(Error::InvalidInput(format!("filter {self}: {why}")));
        if w == 0 || h == 0 {
            return bad("empty rect");
        }
        if x + w > width || y + h > height {
            return bad("outside the working grid");
        }
        if w % dw != 0 || h % dh != 0 {
            return bad("rect does not split into equal parts");
        }
        if self.kind == FilterKind::MotionDirection && !self.channel.is_direction() {
            return bad("motion filters need a direction channel");
        }
        Ok(())
    }

    pub fn rect(&self) -> (usize, usize, usize, usize) {
        (self.x as usize, self.y as usize, self.w as usize, self.h as usize)
    }

    /// Response in channel units (raw integral sums divided by `divisor`).
    #[inline]
    pub fn evaluate(&self, integrals: &[IntegralImage; 6], divisor: f32) -> f32 {
        let (x, y, w, h) = self.rect();
        let ii = &integrals[self.channel.index()];
        let s = |x, y, w, h| ii.sum_unchecked(x, y, w, h);
        let raw = match self.kind {
            FilterKind::SingleRectSum => s(x, y, w, h),
            FilterKind::TwoRectH => {
                let hw = w / 2;
                s(x, y, hw, h) - s(x + hw, y, hw, h)
            }
            FilterKind::TwoRectV => {
                let hh = h / 2;
                s(x, y, w, hh) - s(x, y + hh, w, hh)
            }
            FilterKind::ThreeRectH => {
                let t = w / 3;
                2 * s(x + t, y, t, h) - s(x, y, t, h) - s(x + 2 * t, y, t, h)
            }
            FilterKind::ThreeRectV => {
                let t = h / 3;
                2 * s(x, y + t, w, t) - s(x, y, w, t) - s(x, y + 2 * t, w, t)
            }
            FilterKind::FourRect => {
                let (hw, hh) = (w / 2, h / 2);
                s(x, y, hw, hh) + s(x + hw, y + hh, hw, hh)
                    - s(x + hw, y, hw, hh)
                    - s(x, y + hh, hw, hh)
            }
            FilterKind::MotionDirection => {
                integrals[Channel::Delta.index()].sum_unchecked(x, y, w, h) - s(x, y, w, h)
            }
        };
        let divisor = if self.channel == Channel::Appearance {
            1.0
        } else {
            divisor
        };
        raw as f32 / divisor
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.channel, self.kind, self.x, self.y, self.w, self.h
        )
    }
}

impl FromStr for FilterSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t: Vec<&str> = s.split_whitespace().collect();
        if t.len() != 6 {
            return Err(format!("expected 6 fields, found {}", t.len()));
        }
        let n = |v: &str| v.parse::<u16>().map_err(|_| format!("bad number {v:?}"));
        Ok(FilterSpec {
            channel: t[0].parse()?,
            kind: t[1].parse()?,
            x: n(t[2])?,
            y: n(t[3])?,
            w: n(t[4])?,
            h: n(t[5])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankParams {
    pub width: usize,
    pub height: usize,
    pub pos_step: usize,
    /// Square side lengths; each also yields 2:1 and 1:2 shapes when
    /// `aspect_variants` is set.
    pub scales: Vec<usize>,
    pub aspect_variants: bool,
    pub kinds: Vec<FilterKind>,
    pub channels: Vec<Channel>,
}

impl Default for BankParams {
    fn default() -> Self {
        BankParams {
            width: 64,
            height: 48,
            pos_step: 4,
            scales: vec![8, 16, 32],
            aspect_variants: true,
            kinds: FilterKind::ALL.to_vec(),
            channels: Channel::ALL.to_vec(),
        }
    }
}

impl BankParams {
    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &s in &self.scales {
            out.push((s, s));
            if self.aspect_variants {
                out.push((2 * s, s));
                out.push((s, 2 * s));
            }
        }
        out
    }
}

/// An ordered, immutable list of filters on a fixed working grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    width: usize,
    height: usize,
    filters: Vec<FilterSpec>,
}

impl FilterBank {
    pub fn new(width: usize, height: usize, filters: Vec<FilterSpec>) -> Result<Self> {
        for f in &filters {
            f.validate(width, height)?;
        }
        Ok(FilterBank {
            width,
            height,
            filters,
        })
    }

    /// Full bank, ordered channel, kind, shape, y, x. Shapes that do not split
    /// evenly for a kind are shrunk to the nearest multiple (three-rect kinds
    /// on 8/16/32 px sides use 6/15/30 px).
    pub fn enumerate(params: &BankParams) -> Result<Self> {
        if params.width < 8 || params.height < 8 {
            return Err(Error::InvalidInput(format!(
                "working grid {}x{} is smaller than 8x8",
                params.width, params.height
            )));
        }
        if params.pos_step == 0 || params.scales.contains(&0) {
            return Err(Error::InvalidInput("pos_step and scales must be positive".into()));
        }
        let (gw, gh) = (params.width, params.height);
        let mut filters = Vec::new();
        for &ch in &params.channels {
            for &kind in &params.kinds {
                if !kind.applies_to(ch) {
                    continue;
                }
                let (dw, dh) = kind.divisors();
                for (sw, sh) in params.shapes() {
                    let (w, h) = (sw - sw % dw, sh - sh % dh);
                    if w == 0 || h == 0 || w > gw || h > gh {
                        continue;
                    }
                    for y in (0..=gh - h).step_by(params.pos_step) {
                        for x in (0..=gw - w).step_by(params.pos_step) {
                            filters.push(FilterSpec::new(ch, kind, x, y, w, h));
                        }
                    }
                }
            }
        }
        Ok(FilterBank {
            width: gw,
            height: gh,
            filters,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn filters(&self) -> &[FilterSpec] {
        &self.filters
    }

    pub fn subset(&self, indices: &[usize]) -> Result<FilterBank> {
        let filters = indices
            .iter()
            .map(|&i| {
                self.filters.get(i).copied().ok_or_else(|| {
                    Error::OutOfBounds(format!("filter {i} of a {}-filter bank", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterBank {
            width: self.width,
            height: self.height,
            filters,
        })
    }

    pub fn channels_used(&self) -> [bool; 6] {
        let mut used = [false; 6];
        for f in &self.filters {
            used[f.channel.index()] = true;
            if f.kind == FilterKind::MotionDirection {
                used[Channel::Delta.index()] = true;
            }
        }
        used
    }

    /// Responses of every filter, in bank order.
    pub fn evaluate(&self, channels: &ChannelSet) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(channels, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, channels: &ChannelSet, out: &mut [f32]) -> Result<()> {
        if (channels.width(), channels.height()) != (self.width, self.height) {
            return Err(Error::DimensionMismatch(format!(
                "channels are {}x{}, bank expects {}x{}",
                channels.width(),
                channels.height(),
                self.width,
                self.height
            )));
        }
        let used = self.channels_used();
        let integrals: [IntegralImage; 6] = std::array::from_fn(|i| {
            if used[i] {
                channels.integral(Channel::ALL[i])
            } else {
                IntegralImage::new(0, 0, &[] as &[u16])
            }
        });
        let divisor = channels.pairs() as f32;
        for (o, f) in out.iter_mut().zip(&self.filters) {
            *o = f.evaluate(&integrals, divisor);
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("bank {} {}\n", self.width, self.height);
        for f in &self.filters {
            s.push_str(&f.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty bank file")?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 3 || dims[0] != "bank" {
            return Err(format!("bad bank header {header:?}"));
        }
        let width = dims[1].parse().map_err(|_| "bad bank width")?;
        let height = dims[2].parse().map_err(|_| "bad bank height")?;
        let filters = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| l.parse().map_err(|e| format!("filter line {}: {e}", i + 2)))
            .collect::<std::result::Result<Vec<FilterSpec>, String>>()?;
        FilterBank::new(width, height, filters).map_err(|e| e.to_string())
    }

    /// First 16 hex digits of the SHA-256 of the text form.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&digest[..8])
    }
}
