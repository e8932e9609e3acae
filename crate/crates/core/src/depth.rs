//! Grid types shared by every stage, plus normalization, per-segment
//! statistics and sparse sampling.
//!
//! All grids are row-major with `(row, col)` indexed from the top-left
//! corner. A depth of exactly `0.0` means "no data".

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng;

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidGrid(format!(
            "dimensions must be nonzero, got {width}x{height}"
        )));
    }
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        _ => Err(Error::InvalidGrid(format!(
            "{width}x{height} grid needs {} values, got {len}",
            width.saturating_mul(height)
        ))),
    }
}

/// Dense depth grid in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidGrid(format!(
                "depth at index {i} is {} (must be finite and >= 0)",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "empty grid");
        assert!(value.is_finite() && value >= 0.0);
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds a map from a per-pixel function of `(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.data[idx] > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }

    /// Values of all valid pixels in row-major order.
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied().filter(|v| *v > 0.0)
    }

    /// Returns a copy with every value multiplied by `factor` (≥ 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub(crate) fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                actual: other,
            });
        }
        Ok(())
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(width * height, data.len());
        Self {
            width,
            height,
            data,
        }
    }
}

/// A depth map whose nonzero pixels are individual measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepth(DepthMap);

impl SparseDepth {
    pub fn new(map: DepthMap) -> Self {
        Self(map)
    }

    pub fn from_points(
        width: usize,
        height: usize,
        points: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut data = vec![0.0; width * height];
        for (row, col, depth) in points {
            if row >= height || col >= width {
                return Err(Error::InvalidGrid(format!(
                    "point ({row}, {col}) outside {width}x{height} grid"
                )));
            }
            data[row * width + col] = depth;
        }
        Ok(Self(DepthMap::new(width, height, data)?))
    }

    pub fn as_depth(&self) -> &DepthMap {
        &self.0
    }

    pub fn into_depth(self) -> DepthMap {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    /// Measurement mask: `true` where a depth was recorded.
    pub fn mask(&self) -> Vec<bool> {
        self.0.data.iter().map(|v| *v > 0.0).collect()
    }

    pub fn point_count(&self) -> usize {
        self.0.valid_count()
    }

    /// `(index, depth)` of every measurement in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0
            .data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, v)| (i, *v))
    }

    /// Mean, min and max over the measurements.
    pub fn summary(&self) -> Result<SparseSummary> {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for (_, v) in self.points() {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        if n == 0 {
            return Err(Error::NoValidData);
        }
        Ok(SparseSummary {
            count: n,
            mean: sum / n as f64,
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseSummary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Integer label grid. Label 0 marks unassigned (gap) pixels; the other
/// labels are dense in `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    max_label: u32,
}

impl SegmentMap {
    /// Strict constructor: every label in `0..=max` must occur.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        check_len(width, height, labels.len())?;
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; max_label as usize + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        // label 0 may be absent when there are no gaps
        if let Some(missing) = seen.iter().skip(1).position(|s| !s) {
            return Err(Error::InvalidGrid(format!(
                "segment labels are not dense: label {} missing below max {max_label}",
                missing + 1
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            max_label,
        })
    }

    /// Relabels arbitrary nonzero labels to `1..=K` by ascending original
    /// value. Returns the map and whether any relabeling happened.
    pub fn densify(width: usize, height: usize, raw: Vec<u32>) -> Result<(Self, bool)> {
        check_len(width, height, raw.len())?;
        let mut distinct: Vec<u32> = raw.iter().copied().filter(|l| *l != 0).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let remap: BTreeMap<u32, u32> = distinct
            .iter()
            .enumerate()
            .map(|(i, l)| (*l, i as u32 + 1))
            .collect();
        let changed = remap.iter().any(|(from, to)| from != to);
        let labels = raw
            .into_iter()
            .map(|l| if l == 0 { 0 } else { remap[&l] })
            .collect();
        Ok((
            Self {
                width,
                height,
                labels,
                max_label: distinct.len() as u32,
            },
            changed,
        ))
    }

    pub fn uniform(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty grid");
        Self {
            width,
            height,
            labels: vec![1; width * height],
            max_label: 1,
        }
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

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Number of nonzero segments (K).
    pub fn segment_count(&self) -> u32 {
        self.max_label
    }

    pub fn gap_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == 0).count()
    }

    pub(crate) fn from_dense_unchecked(width: usize, height: usize, labels: Vec<u32>) -> Self {
        let max_label = labels.iter().copied().max().unwrap_or(0);
        Self {
            width,
            height,
            labels,
            max_label,
        }
    }
}

/// Grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_len(width, height, values.len())?;
        if let Some(i) = values
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidGrid(format!(
                "gray value at index {i} is {} (must lie in [0, 1])",
                values[i]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentStats {
    pub label: u32,
    pub pixel_count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Min-max normalization over valid pixels. Invalid pixels stay 0; a
/// constant map sends every valid pixel to 0.5.
pub fn normalize(d: &DepthMap) -> Result<DepthMap> {
    let field = normalize_field(d)?;
    Ok(DepthMap::from_raw(d.width, d.height, field.values))
}

/// Normalized values together with the validity mask of the source map,
/// so that the minimum (which normalizes to 0) stays distinguishable from
/// missing data.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl NormalizedField {
    /// Min-max normalizes again over the valid pixels.
    pub fn renormalized(&self) -> Self {
        let (values, _) = min_max_normalize(&self.values, &self.valid);
        Self {
            values,
            ..self.clone()
        }
    }
}

fn min_max_normalize(values: &[f64], valid: &[bool]) -> (Vec<f64>, bool) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, ok) in values.iter().zip(valid) {
        if *ok {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if lo > hi {
        return (vec![0.0; values.len()], false);
    }
    let range = hi - lo;
    let out = values
        .iter()
        .zip(valid)
        .map(|(&v, &ok)| {
            if !ok {
                0.0
            } else if range > 0.0 {
                ((v - lo) / range).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .collect();
    (out, true)
}

pub fn normalize_field(d: &DepthMap) -> Result<NormalizedField> {
    let valid: Vec<bool> = d.data.iter().map(|v| *v > 0.0).collect();
    let (values, any) = min_max_normalize(&d.data, &valid);
    if !any {
        return Err(Error::NoValidData);
    }
    Ok(NormalizedField {
        width: d.width,
        height: d.height,
        values,
        valid,
    })
}

/// Per-segment statistics of `d` over each segment's valid pixels.
///
/// Labels whose pixels are all invalid in `d` are omitted.
pub fn segment_stats(d: &DepthMap, seg: &SegmentMap) -> Result<Vec<SegmentStats>> {
    d.ensure_same_shape(seg.dims())?;
    let k = seg.segment_count() as usize;
    let mut acc: Vec<(usize, f64, f64, f64)> =
        vec![(0, 0.0, f64::INFINITY, f64::NEG_INFINITY); k + 1];
    for (&label, &v) in seg.labels.iter().zip(&d.data) {
        if label == 0 || v <= 0.0 {
            continue;
        }
        let e = &mut acc[label as usize];
        e.0 += 1;
        e.1 += v;
        e.2 = e.2.min(v);
        e.3 = e.3.max(v);
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, e)| e.0 > 0)
        .map(|(label, (n, sum, min, max))| SegmentStats {
            label: label as u32,
            pixel_count: n,
            // guard the ulp-level drift of sum/n outside [min, max]
            mean: (sum / n as f64).clamp(min, max),
            min,
            max,
        })
        .collect())
}

/// Picks `n` valid pixels of `gt` uniformly without replacement and copies
/// their depths. Requests above the valid count return a copy of `gt`.
pub fn sample_sparse(gt: &DepthMap, n: usize, seed: u64) -> SparseDepth {
    let valid: Vec<usize> = (0..gt.len()).filter(|&i| gt.is_valid(i)).collect();
    let mut data = vec![0.0; gt.len()];
    if n >= valid.len() {
        for &i in &valid {
            data[i] = gt.data[i];
        }
    } else {
        let mut rng = rng::stream(seed, rng::SAMPLING_STREAM);
        for pick in rand::seq::index::sample(&mut rng, valid.len(), n) {
            let i = valid[pick];
            data[i] = gt.data[i];
        }
    }
    SparseDepth(DepthMap::from_raw(gt.width, gt.height, data))
}
