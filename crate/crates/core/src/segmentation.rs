//! Region-growing segmenter used when no external mask is supplied.

use std::collections::VecDeque;

use crate::depth::{normalize_field, DepthMap, GrayImage, NormalizedField, SegmentMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    /// Maximum value difference between joined neighbors, in `(0, 1]`.
    pub join_threshold: f64,
    /// Components smaller than this become gaps (label 0).
    pub min_segment_pixels: usize,
    pub connectivity: Connectivity,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            join_threshold: 0.05,
            min_segment_pixels: 16,
            connectivity: Connectivity::Four,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.join_threshold > 0.0 && self.join_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "join_threshold must lie in (0, 1], got {}",
                self.join_threshold
            )));
        }
        if self.min_segment_pixels == 0 {
            return Err(Error::InvalidConfig("min_segment_pixels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Flood-fill segmentation of a `[0, 1]` field.
///
/// Neighbors join when their values differ by at most `join_threshold`.
/// Pixels with `valid[i] == false` are never labeled. Labels are assigned
/// in order of each component's first row-major pixel.
pub fn segment_field(
    width: usize,
    height: usize,
    values: &[f64],
    valid: Option<&[bool]>,
    cfg: &SegmenterConfig,
) -> Result<SegmentMap> {
    cfg.validate()?;
    if values.len() != width * height || valid.is_some_and(|m| m.len() != values.len()) {
        return Err(Error::InvalidGrid(format!(
            "field of {} values does not match {width}x{height}",
            values.len()
        )));
    }
    let is_valid = |i: usize| valid.is_none_or(|m| m[i]);
    let mut comp = vec![u32::MAX; values.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..values.len() {
        if comp[start] != u32::MAX || !is_valid(start) {
            continue;
        }
        let id = sizes.len() as u32;
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (r, c) = ((p / width) as isize, (p % width) as isize);
            for &(dr, dc) in cfg.connectivity.offsets() {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
                    continue;
                }
                let q = nr as usize * width + nc as usize;
                if comp[q] == u32::MAX
                    && is_valid(q)
                    && (values[p] - values[q]).abs() <= cfg.join_threshold
                {
                    comp[q] = id;
                    queue.push_back(q);
                }
            }
        }
        sizes.push(size);
    }

    let mut relabel = vec![0u32; sizes.len()];
    let mut next = 1;
    for (id, &size) in sizes.iter().enumerate() {
        if size >= cfg.min_segment_pixels {
            relabel[id] = next;
            next += 1;
        }
    }
    let labels = comp
        .into_iter()
        .map(|c| if c == u32::MAX { 0 } else { relabel[c as usize] })
        .collect();
    Ok(SegmentMap::from_dense_unchecked(width, height, labels))
}

pub fn segment_normalized(field: &NormalizedField, cfg: &SegmenterConfig) -> Result<SegmentMap> {
    segment_field(field.width, field.height, &field.values, Some(&field.valid), cfg)
}

/// Normalizes a relative depth map, then segments it. Invalid pixels
/// become gaps.
pub fn segment_from_depth(d_rel: &DepthMap, cfg: &SegmenterConfig) -> Result<SegmentMap> {
    segment_normalized(&normalize_field(d_rel)?, cfg)
}

/// Segments a grayscale image directly.
pub fn segment_from_gray(img: &GrayImage, cfg: &SegmenterConfig) -> Result<SegmentMap> {
    segment_field(img.width(), img.height(), img.values(), None, cfg)
}
