//! 8-bit grayscale frames and the binary PGM (P5) codec.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image needs {} bytes, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    /// Converts interleaved RGB8 with luma = round(0.299R + 0.587G + 0.114B).
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} rgb image needs {} bytes, got {}",
                width,
                height,
                width * height * 3,
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| {
                let l = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                l.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Fills the half-open pixel box `[x0, x1) × [y0, y1)`, clipped to the image.
    pub fn fill_box(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, v: u8) {
        let x1 = x1.min(self.width);
        let y1 = y1.min(self.height);
        for y in y0.min(y1)..y1 {
            let row = y * self.width;
            self.data[row + x0.min(x1)..row + x1].fill(v);
        }
    }

    /// Area-averaging resize. Each output pixel is the coverage-weighted mean of
    /// the source pixels under its footprint. Identity when sizes match.
    pub fn resize_area(&self, out_w: usize, out_h: usize) -> GrayImage {
        if (out_w, out_h) == (self.width, self.height) {
            return self.clone();
        }
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let spans = |n_out: usize, scale: f64, n_in: usize| -> Vec<Vec<(usize, f64)>> {
            (0..n_out)
                .map(|o| {
                    let a = o as f64 * scale;
                    let b = ((o + 1) as f64 * scale).min(n_in as f64);
                    let mut v = Vec::new();
                    let mut i = a.floor() as usize;
                    while (i as f64) < b && i < n_in {
                        let lo = a.max(i as f64);
                        let hi = b.min((i + 1) as f64);
                        if hi > lo {
                            v.push((i, hi - lo));
                        }
                        i += 1;
                    }
                    v
                })
                .collect()
        };
        let xs = spans(out_w, sx, self.width);
        let ys = spans(out_h, sy, self.height);
        let mut out = GrayImage::new(out_w, out_h);
        for (oy, yspan) in ys.iter().enumerate() {
            for (ox, xspan) in xs.iter().enumerate() {
                let mut acc = 0.0;
                let mut area = 0.0;
                for &(iy, wy) in yspan {
                    for &(ix, wx) in xspan {
                        acc += self.get(ix, iy) as f64 * wx * wy;
                        area += wx * wy;
                    }
                }
                out.set(ox, oy, (acc / area).round().clamp(0.0, 255.0) as u8);
            }
        }
        out
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let mut token = || -> std::result::Result<String, String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err("not a binary PGM (P5)".into());
        }
        let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad number {s:?}"));
        let width = num(token()?)?;
        let height = num(token()?)?;
        let maxval = num(token()?)?;
        if maxval == 0 || maxval > 255 {
            return Err(format!("unsupported maxval {maxval}"));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let need = width * height;
        if bytes.len() < pos + need {
            return Err("truncated raster".into());
        }
        let mut data = bytes[pos..pos + need].to_vec();
        if maxval != 255 {
            for v in &mut data {
                *v = ((*v as u32 * 255 + maxval as u32 / 2) / maxval as u32).min(255) as u8;
            }
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_pgm(&bytes).map_err(|r| Error::parse(path, r))
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode_pgm()).map_err(|e| Error::io(path, e))
    }
}
