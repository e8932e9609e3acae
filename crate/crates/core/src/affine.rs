//! Affine alignment baselines: fit `metric ≈ a·relative + b` against the
//! sparse measurements, either once for the whole map or per segment.

use std::fmt;

use crate::depth::{DepthMap, SegmentMap, SparseDepth};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub a: f64,
    pub b: f64,
}

impl AffineParams {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0 };

    pub fn apply(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    /// Full least-squares fit.
    Fitted,
    /// No measurements; the relative values pass through unchanged.
    Identity,
    /// One point or constant predictor: scale 0, bias = mean target.
    DegenerateBias,
}

impl fmt::Display for FitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitStatus::Fitted => "fitted",
            FitStatus::Identity => "identity",
            FitStatus::DegenerateBias => "degenerate-bias",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub params: AffineParams,
    pub status: FitStatus,
    pub points: usize,
}

impl AffineFit {
    const IDENTITY: Self = Self {
        params: AffineParams::IDENTITY,
        status: FitStatus::Identity,
        points: 0,
    };
}

/// Least squares over `(x, y)` pairs via mean-centered normal equations.
/// Returns `None` for an empty slice.
pub fn fit_points(points: &[(f64, f64)]) -> Option<AffineFit> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut sum_x2 = 0.0;
    for &(x, y) in points {
        let dx = x - mx;
        sxx += dx * dx;
        sxy += dx * (y - my);
        sum_x2 += x * x;
    }
    if points.len() < 2 || sxx <= f64::EPSILON * sum_x2 {
        return Some(AffineFit {
            params: AffineParams { a: 0.0, b: my },
            status: FitStatus::DegenerateBias,
            points: points.len(),
        });
    }
    let a = sxy / sxx;
    Some(AffineFit {
        params: AffineParams { a, b: my - a * mx },
        status: FitStatus::Fitted,
        points: points.len(),
    })
}

pub fn sum_squared_residual(points: &[(f64, f64)], p: &AffineParams) -> f64 {
    points.iter().map(|&(x, y)| (p.apply(x) - y).powi(2)).sum()
}

/// `(relative, metric)` pairs at every measured pixel with valid relative
/// depth, in row-major order.
pub fn collect_points(d_rel: &DepthMap, d_s: &SparseDepth) -> Result<Vec<(f64, f64)>> {
    d_rel.ensure_same_shape(d_s.dims())?;
    Ok(d_s
        .points()
        .filter(|(i, _)| d_rel.is_valid(*i))
        .map(|(i, y)| (d_rel.data()[i], y))
        .collect())
}

/// One scale and bias for the whole map.
pub fn fit_global(d_rel: &DepthMap, d_s: &SparseDepth) -> Result<AffineFit> {
    fit_points(&collect_points(d_rel, d_s)?).ok_or(Error::NoValidData)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFit {
    pub label: u32,
    pub fit: AffineFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAffine {
    /// One entry per nonzero label, ascending.
    pub segments: Vec<SegmentFit>,
    /// Global fit over all points, used for gap pixels.
    pub fallback: AffineFit,
}

impl SegmentAffine {
    pub fn get(&self, label: u32) -> Option<&AffineFit> {
        self.segments
            .binary_search_by_key(&label, |s| s.label)
            .ok()
            .map(|i| &self.segments[i].fit)
    }
}

/// Independent fits per segment. Segments without measurements keep the
/// relative values (identity).
pub fn fit_segmentwise(
    d_rel: &DepthMap,
    seg: &SegmentMap,
    d_s: &SparseDepth,
) -> Result<SegmentAffine> {
    d_rel.ensure_same_shape(seg.dims())?;
    d_rel.ensure_same_shape(d_s.dims())?;
    let mut buckets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); seg.segment_count() as usize + 1];
    let mut all = Vec::new();
    for (i, y) in d_s.points() {
        if !d_rel.is_valid(i) {
            continue;
        }
        let pt = (d_rel.data()[i], y);
        buckets[seg.labels()[i] as usize].push(pt);
        all.push(pt);
    }
    let segments = buckets
        .iter()
        .enumerate()
        .skip(1)
        .map(|(label, pts)| SegmentFit {
            label: label as u32,
            fit: fit_points(pts).unwrap_or(AffineFit::IDENTITY),
        })
        .collect();
    Ok(SegmentAffine {
        segments,
        fallback: fit_points(&all).unwrap_or(AffineFit::IDENTITY),
    })
}

#[derive(Debug, Clone, Copy)]
pub enum AffineModel<'a> {
    Global(AffineParams),
    Segmentwise {
        fits: &'a SegmentAffine,
        seg: &'a SegmentMap,
    },
}

/// Maps every pixel through the model, clamping below at `clamp_floor`.
pub fn apply_affine(d_rel: &DepthMap, model: AffineModel<'_>, clamp_floor: f64) -> Result<DepthMap> {
    let data = match model {
        AffineModel::Global(p) => d_rel
            .data()
            .iter()
            .map(|&x| p.apply(x).max(clamp_floor))
            .collect(),
        AffineModel::Segmentwise { fits, seg } => {
            d_rel.ensure_same_shape(seg.dims())?;
            let mut table = vec![fits.fallback.params];
            for label in 1..=seg.segment_count() {
                table.push(
                    fits.get(label)
                        .map(|f| f.params)
                        .ok_or(Error::MissingLabel(label))?,
                );
            }
            d_rel
                .data()
                .iter()
                .zip(seg.labels())
                .map(|(&x, &l)| table[l as usize].apply(x).max(clamp_floor))
                .collect()
        }
    };
    DepthMap::new(d_rel.width(), d_rel.height(), data)
}
