//! Piecewise synthetic scenes with known segments and known per-segment
//! affine distortions. A scene's relative map is correct inside every
//! region and wrong across regions, which is exactly what the segment-wise
//! methods are meant to exploit.

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::affine::AffineParams;
use crate::depth::{DepthMap, SegmentMap};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Constant,
    #[default]
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionKind {
    Identity,
    #[default]
    Random,
    /// Taken from `SceneSpec::distortions`, one `[a, b]` per region.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub regions: usize,
    /// `[min, max]` ground-truth depth in meters.
    pub depth_range: [f64; 2],
    pub region_kind: RegionKind,
    pub distortion: DistortionKind,
    /// Range of the per-region scale `a` for random distortions.
    pub scale_range: [f64; 2],
    /// Range of the per-region shift `b` for random distortions.
    pub shift_range: [f64; 2],
    pub distortions: Vec<[f64; 2]>,
    /// Std of Gaussian noise added to the relative map.
    pub rel_noise: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            regions: 4,
            depth_range: [1.0, 10.0],
            region_kind: RegionKind::Planar,
            distortion: DistortionKind::Random,
            scale_range: [0.2, 2.0],
            shift_range: [0.0, 5.0],
            distortions: Vec::new(),
            rel_noise: 0.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad("scene dimensions must be nonzero".into());
        }
        if self.regions == 0 || self.regions > self.width * self.height {
            return bad(format!(
                "regions must lie in 1..={}, got {}",
                self.width * self.height,
                self.regions
            ));
        }
        let [lo, hi] = self.depth_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("depth_range must satisfy 0 < min <= max, got [{lo}, {hi}]"));
        }
        if !(self.rel_noise >= 0.0 && self.rel_noise.is_finite()) {
            return bad("rel_noise must be >= 0".into());
        }
        match self.distortion {
            DistortionKind::Random => {
                let [a0, a1] = self.scale_range;
                let [b0, b1] = self.shift_range;
                if !(a0 > 0.0 && a1 >= a0 && b1 >= b0 && a1.is_finite() && b1.is_finite() && b0.is_finite()) {
                    return bad("scale_range must be positive and ordered, shift_range ordered".into());
                }
            }
            DistortionKind::Explicit => {
                if self.distortions.len() != self.regions {
                    return bad(format!(
                        "expected {} explicit distortions, got {}",
                        self.regions,
                        self.distortions.len()
                    ));
                }
                if self.distortions.iter().any(|[a, b]| !(*a > 0.0 && b.is_finite())) {
                    return bad("explicit distortions need a > 0 and finite b".into());
                }
            }
            DistortionKind::Identity => {}
        }
        Ok(())
    }
}

/// Axis-aligned block of pixels, `rows × cols` starting at `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Rect {
    fn area(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub gt: DepthMap,
    /// Region `k` (1-based) covers `rects[k - 1]`.
    pub labels: SegmentMap,
    pub rel: DepthMap,
    pub rects: Vec<Rect>,
    /// Per-region map from ground truth to relative depth.
    pub distortions: Vec<AffineParams>,
}

/// Recursively splits the largest rectangle until `regions` remain.
fn split_rects<R: RngCore>(rng: &mut R, w: usize, h: usize, regions: usize) -> Result<Vec<Rect>> {
    let mut rects = vec![Rect { row: 0, col: 0, rows: h, cols: w }];
    while rects.len() < regions {
        let (idx, _) = rects
            .iter()
            .enumerate()
            .filter(|(_, r)| r.area() >= 2)
            .max_by(|a, b| a.1.area().cmp(&b.1.area()).then(b.0.cmp(&a.0)))
            .ok_or_else(|| Error::InvalidConfig("cannot split scene into that many regions".into()))?;
        let r = rects[idx];
        let split_cols = r.cols > r.rows || (r.cols == r.rows && rng.next_u64() & 1 == 0);
        let len = if split_cols { r.cols } else { r.rows };
        // cut somewhere in the middle 40% when there is room
        let lo = ((len as f64 * 0.3).floor() as usize).max(1);
        let hi = ((len as f64 * 0.7).ceil() as usize).min(len - 1).max(lo);
        let cut = lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize;
        let (a, b) = if split_cols {
            (
                Rect { cols: cut, ..r },
                Rect { col: r.col + cut, cols: r.cols - cut, ..r },
            )
        } else {
            (
                Rect { rows: cut, ..r },
                Rect { row: r.row + cut, rows: r.rows - cut, ..r },
            )
        };
        rects[idx] = a;
        rects.push(b);
    }
    rects.sort_by_key(|r| (r.row, r.col));
    Ok(rects)
}

/// Builds a scene deterministically from its spec.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = rng::stream(spec.seed, rng::SCENE_STREAM);
    let rects = split_rects(&mut rng, w, h, spec.regions)?;
    let [dmin, dmax] = spec.depth_range;

    let mut labels = vec![0u32; w * h];
    let mut gt = vec![0.0; w * h];
    for (k, r) in rects.iter().enumerate() {
        let (lo, hi, wx) = match spec.region_kind {
            RegionKind::Constant => {
                let v = rng::uniform(&mut rng, dmin, dmax);
                (v, v, 0.0)
            }
            RegionKind::Planar => (
                rng::uniform(&mut rng, dmin, dmax),
                rng::uniform(&mut rng, dmin, dmax),
                rng::unit_f64(&mut rng),
            ),
        };
        for row in r.row..r.row + r.rows {
            for col in r.col..r.col + r.cols {
                let fr = if r.rows > 1 { (row - r.row) as f64 / (r.rows - 1) as f64 } else { 0.0 };
                let fc = if r.cols > 1 { (col - r.col) as f64 / (r.cols - 1) as f64 } else { 0.0 };
                let t = wx * fc + (1.0 - wx) * fr;
                let i = row * w + col;
                gt[i] = (lo + (hi - lo) * t).clamp(dmin, dmax);
                labels[i] = k as u32 + 1;
            }
        }
    }

    let distortions: Vec<AffineParams> = match spec.distortion {
        DistortionKind::Identity => vec![AffineParams::IDENTITY; rects.len()],
        DistortionKind::Explicit => spec
            .distortions
            .iter()
            .map(|&[a, b]| AffineParams { a, b })
            .collect(),
        DistortionKind::Random => (0..rects.len())
            .map(|_| AffineParams {
                a: rng::uniform(&mut rng, spec.scale_range[0], spec.scale_range[1]),
                b: rng::uniform(&mut rng, spec.shift_range[0], spec.shift_range[1]),
            })
            .collect(),
    };

    let mut rel: Vec<f64> = gt
        .iter()
        .zip(&labels)
        .map(|(&g, &l)| distortions[l as usize - 1].apply(g))
        .collect();
    if spec.rel_noise > 0.0 {
        let normal = Normal::new(0.0, spec.rel_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut noise_rng = rng::stream(spec.seed, rng::PERTURB_STREAM);
        for v in rel.iter_mut() {
            *v = (*v + normal.sample(&mut noise_rng)).max(1e-6);
        }
    }
    if let Some(i) = rel.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "distortion produces non-positive relative depth {} at pixel {i}",
            rel[i]
        )));
    }

    Ok(Scene {
        gt: DepthMap::new(w, h, gt)?,
        labels: SegmentMap::new(w, h, labels)?,
        rel: DepthMap::new(w, h, rel)?,
        rects,
        distortions,
    })
}
