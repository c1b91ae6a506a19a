//! Dynamic Haar features over short frame windows.
//!
//! A window is reduced to six channel images (appearance plus five motion
//! channels), each channel gets an integral image, and every filter of a
//! [`FilterBank`] is evaluated with a handful of table lookups.

mod channels;
mod filters;
mod integral;
mod matrix;

use std::collections::HashMap;
use std::path::Path;

pub use channels::{build_channels, Channel, ChannelSet};
pub use filters::{BankParams, FilterBank, FilterKind, FilterSpec};
pub use integral::IntegralImage;
pub use matrix::{read_segment_meta, write_segment_meta, FeatureMatrix, MATRIX_MAGIC};

use crate::corpus::{Origin, VideoRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::image::GrayImage;
use crate::segmentation::Segment;

/// Responses of `bank` on one window. Frames are area-resampled to the bank's
/// working grid first.
pub fn extract_features(frames: &[&GrayImage], bank: &FilterBank) -> Result<Vec<f32>> {
    let mut out = vec![0.0; bank.len()];
    extract_features_into(frames, bank, &mut out)?;
    Ok(out)
}

pub fn extract_features_into(
    frames: &[&GrayImage],
    bank: &FilterBank,
    out: &mut [f32],
) -> Result<()> {
    let grid = (bank.width(), bank.height());
    let channels = if frames.iter().all(|f| f.dims() == grid) {
        build_channels(frames)?
    } else {
        let resized: Vec<GrayImage> = frames
            .iter()
            .map(|f| f.resize_area(grid.0, grid.1))
            .collect();
        build_channels(&resized.iter().collect::<Vec<_>>())?
    };
    bank.evaluate_into(&channels, out)
}

/// Segment features together with the segment metadata (label, origin).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub matrix: FeatureMatrix,
    pub segments: Vec<Segment>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// +1 fall, −1 non-fall.
    pub fn labels(&self) -> Vec<i8> {
        self.segments
            .iter()
            .map(|s| s.label.sign().unwrap_or(0))
            .collect()
    }

    pub fn origins(&self) -> Vec<Origin> {
        self.segments.iter().map(|s| s.origin).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureSet {
        FeatureSet {
            matrix: self.matrix.select_rows(rows),
            segments: rows.iter().map(|&r| self.segments[r].clone()).collect(),
        }
    }

    pub fn concat(parts: &[&FeatureSet]) -> Result<FeatureSet> {
        let mats: Vec<&FeatureMatrix> = parts.iter().map(|p| &p.matrix).collect();
        Ok(FeatureSet {
            matrix: FeatureMatrix::vstack(&mats)?,
            segments: parts.iter().flat_map(|p| p.segments.iter().cloned()).collect(),
        })
    }

    /// Writes `<stem>.ofm` and the `<stem>.meta.tsv` sidecar.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        self.matrix.write(&dir.join(format!("{stem}.ofm")))?;
        write_segment_meta(&dir.join(format!("{stem}.meta.tsv")), &self.segments)
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let matrix = FeatureMatrix::read(&dir.join(format!("{stem}.ofm")))?;
        let segments = read_segment_meta(&dir.join(format!("{stem}.meta.tsv")))?;
        if segments.len() != matrix.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{stem}: {} rows but {} metadata lines",
                matrix.rows(),
                segments.len()
            )));
        }
        Ok(FeatureSet { matrix, segments })
    }
}

/// Extracts every segment, one matrix row per segment, in segment order.
pub fn extract_matrix(
    videos: &[VideoRecord],
    segments: &[Segment],
    bank: &FilterBank,
    exec: Execution,
) -> Result<FeatureSet> {
    let by_id: HashMap<&str, &VideoRecord> = videos.iter().map(|v| (v.id(), v)).collect();
    let cols = bank.len();
    let mut matrix = FeatureMatrix::zeros(segments.len(), cols);
    if cols > 0 {
        let errors = std::sync::Mutex::new(Vec::new());
        exec.for_each_chunk_mut(matrix.as_mut_slice(), cols, |row, out| {
            let seg = &segments[row];
            let res = by_id
                .get(seg.video_id.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("unknown video {}", seg.video_id)))
                .and_then(|v| {
                    let all = v.frames.frames();
                    let frames = seg
                        .frame_indices
                        .iter()
                        .map(|&i| {
                            all.get(i).ok_or_else(|| {
                                Error::OutOfBounds(format!("frame {i} of video {}", seg.video_id))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    extract_features_into(&frames, bank, out)
                });
            if let Err(e) = res {
                errors.lock().unwrap().push((row, e));
            }
        });
        let mut errors = errors.into_inner().unwrap();
        errors.sort_by_key(|(r, _)| *r);
        if let Some((_, e)) = errors.into_iter().next() {
            return Err(e);
        }
    }
    Ok(FeatureSet {
        matrix,
        segments: segments.to_vec(),
    })
}
