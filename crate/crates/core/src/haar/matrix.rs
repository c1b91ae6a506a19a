use std::fs;
use std::path::Path;

use crate::corpus::Origin;
use crate::error::{Error, Result};
use crate::segmentation::{Segment, SegmentLabel};

pub const MATRIX_MAGIC: [u8; 4] = *b"OFFM";

/// Dense row-major `f32` matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<FeatureMatrix> {
        if let Some(c) = cols.iter().find(|c| **c >= self.cols) {
            return Err(Error::OutOfBounds(format!(
                "column {c} of a {}-column matrix",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(FeatureMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(Error::DimensionMismatch("vstack of different widths".into()));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|m| m.data.len()).sum());
        for m in parts {
            data.extend_from_slice(&m.data);
        }
        Ok(FeatureMatrix {
            rows: data.len() / cols.max(1),
            cols,
            data,
        })
    }

    /// `magic | rows: u64 | cols: u64 | rows·cols f32`, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4);
        out.extend_from_slice(&MATRIX_MAGIC);
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 20 || bytes[..4] != MATRIX_MAGIC {
            return Err("not a feature matrix file".into());
        }
        let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let payload = &bytes[20..];
        if payload.len() != rows * cols * 4 {
            return Err(format!(
                "{rows}x{cols} matrix needs {} payload bytes, found {}",
                rows * cols * 4,
                payload.len()
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|r| Error::parse(path, r))
    }
}

/// Sidecar rows: `video_id  label  origin  frame,indices`.
pub fn write_segment_meta(path: &Path, segments: &[Segment]) -> Result<()> {
    let mut text = String::new();
    for s in segments {
        let label = match s.label {
            SegmentLabel::Fall => "fall",
            SegmentLabel::NonFall => "non_fall",
            SegmentLabel::Discarded => "discarded",
        };
        let idx: Vec<String> = s.frame_indices.iter().map(|i| i.to_string()).collect();
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.video_id,
            label,
            s.origin,
            idx.join(",")
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_segment_meta(path: &Path) -> Result<Vec<Segment>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = |r: String| Error::parse(path, format!("line {}: {r}", n + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let label = match cols[1] {
                "fall" => SegmentLabel::Fall,
                "non_fall" => SegmentLabel::NonFall,
                "discarded" => SegmentLabel::Discarded,
                other => return Err(bad(format!("unknown label {other:?}"))),
            };
            let origin: Origin = cols[2].parse().map_err(bad)?;
            let frame_indices = cols[3]
                .split(',')
                .map(|v| v.parse().map_err(|_| bad(format!("bad index {v:?}"))))
                .collect::<Result<Vec<usize>>>()?;
            Ok(Segment {
                video_id: cols[0].to_string(),
                frame_indices,
                label,
                origin,
            })
        })
        .collect()
}
