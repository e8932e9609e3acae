//! Synthetic training pairs: per-segment rescaling of a relative depth map,
//! gap filling, and noisy re-masking with the real sparse pattern.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::depth::{segment_stats, DepthMap, SegmentMap, SparseDepth};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_CLAMP_FLOOR: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 16;
pub const FILL_RADIUS: usize = 2;

/// How the per-segment scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaMode {
    /// `2·mean(D_s) / mean(D_rel over the segment)`.
    #[default]
    Formula,
    /// Uniform over `[min(D_s), max(D_s)]`.
    Random,
}

/// How the per-segment offset is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaMode {
    /// `U(min(D_s), max(D_s)) − mean(D_s)`.
    #[default]
    Uniform,
    Zero,
}

impl FromStr for AlphaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(AlphaMode::Formula),
            "random" => Ok(AlphaMode::Random),
            _ => Err(Error::InvalidConfig(format!("unknown alpha mode `{s}`"))),
        }
    }
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaMode::Formula => "formula",
            AlphaMode::Random => "random",
        })
    }
}

impl FromStr for BetaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(BetaMode::Uniform),
            "zero" => Ok(BetaMode::Zero),
            _ => Err(Error::InvalidConfig(format!("unknown beta mode `{s}`"))),
        }
    }
}

impl fmt::Display for BetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaMode::Uniform => "uniform",
            BetaMode::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleRecord {
    pub label: u32,
    pub alpha: f64,
    pub beta: f64,
    /// The segment had no valid relative depth; it maps to
    /// `mean(D_s) + beta` instead of `alpha·d + beta`.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescalePlan {
    /// Sorted by label.
    pub records: Vec<RescaleRecord>,
    pub alpha_mode: AlphaMode,
    pub beta_mode: BetaMode,
    pub sparse_mean: f64,
    pub clamp_floor: f64,
}

impl RescalePlan {
    /// A plan with the same `(alpha, beta)` for labels `1..=segments`.
    pub fn uniform(segments: u32, alpha: f64, beta: f64) -> Self {
        Self {
            records: (1..=segments)
                .map(|label| RescaleRecord {
                    label,
                    alpha,
                    beta,
                    degenerate: false,
                })
                .collect(),
            alpha_mode: AlphaMode::Formula,
            beta_mode: BetaMode::Uniform,
            sparse_mean: 0.0,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
        }
    }

    pub fn record(&self, label: u32) -> Option<&RescaleRecord> {
        self.records
            .binary_search_by_key(&label, |r| r.label)
            .ok()
            .map(|i| &self.records[i])
    }
}

/// Draws the per-segment rescaling factors.
///
/// Each segment draws from its own stream keyed by `(seed, label)`: the
/// first draw is always beta, the second (random mode only) alpha.
pub fn plan_rescale(
    d_rel: &DepthMap,
    seg: &SegmentMap,
    d_s: &SparseDepth,
    alpha_mode: AlphaMode,
    beta_mode: BetaMode,
    seed: u64,
) -> Result<RescalePlan> {
    d_rel.ensure_same_shape(seg.dims())?;
    d_rel.ensure_same_shape(d_s.dims())?;
    let sparse = d_s.summary()?;
    let stats = segment_stats(d_rel, seg)?;
    let mut seg_means = vec![0.0; seg.segment_count() as usize + 1];
    for s in &stats {
        seg_means[s.label as usize] = s.mean;
    }

    let records = (1..=seg.segment_count())
        .map(|label| {
            let mut rng = rng::segment_stream(seed, label);
            let u_beta = rng::uniform(&mut rng, sparse.min, sparse.max);
            let beta = match beta_mode {
                BetaMode::Uniform => u_beta - sparse.mean,
                BetaMode::Zero => 0.0,
            };
            let rel_mean = seg_means[label as usize];
            let degenerate = rel_mean <= 0.0;
            let alpha = match alpha_mode {
                AlphaMode::Formula if degenerate => 0.0,
                AlphaMode::Formula => 2.0 * sparse.mean / rel_mean,
                AlphaMode::Random => rng::uniform(&mut rng, sparse.min, sparse.max),
            };
            RescaleRecord {
                label,
                alpha,
                beta,
                degenerate,
            }
        })
        .collect();

    Ok(RescalePlan {
        records,
        alpha_mode,
        beta_mode,
        sparse_mean: sparse.mean,
        clamp_floor: DEFAULT_CLAMP_FLOOR,
    })
}

/// Applies a plan segment by segment. Gap pixels (label 0) and pixels with
/// no relative depth come out as 0; everything else is clamped below at
/// the plan's floor.
pub fn rescale(d_rel: &DepthMap, seg: &SegmentMap, plan: &RescalePlan) -> Result<DepthMap> {
    d_rel.ensure_same_shape(seg.dims())?;
    let k = seg.segment_count() as usize;
    let mut table = Vec::with_capacity(k + 1);
    table.push(None);
    for label in 1..=seg.segment_count() {
        table.push(Some(
            *plan.record(label).ok_or(Error::MissingLabel(label))?,
        ));
    }
    let data = d_rel
        .data()
        .iter()
        .zip(seg.labels())
        .map(|(&d, &label)| match table[label as usize] {
            None => 0.0,
            Some(r) if r.degenerate => (plan.sparse_mean + r.beta).max(plan.clamp_floor),
            Some(_) if d <= 0.0 => 0.0,
            Some(r) => (r.alpha * d + r.beta).max(plan.clamp_floor),
        })
        .collect();
    DepthMap::new(d_rel.width(), d_rel.height(), data)
}

/// One gap-filling pass: each zero pixel with at least one nonzero pixel in
/// its 5×5 window takes the mean of those nonzero values. Reads only the
/// input snapshot. Returns the new map and the number of filled pixels.
pub fn fill_pass(d: &DepthMap) -> (DepthMap, usize) {
    let (w, h) = d.dims();
    let src = d.data();
    let rows: Vec<(Vec<f64>, usize)> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut row = src[r * w..(r + 1) * w].to_vec();
            let mut filled = 0;
            for (c, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    continue;
                }
                let mut sum = 0.0;
                let mut n = 0usize;
                for rr in r.saturating_sub(FILL_RADIUS)..(r + FILL_RADIUS + 1).min(h) {
                    for cc in c.saturating_sub(FILL_RADIUS)..(c + FILL_RADIUS + 1).min(w) {
                        let x = src[rr * w + cc];
                        if x != 0.0 {
                            sum += x;
                            n += 1;
                        }
                    }
                }
                if n > 0 {
                    *v = sum / n as f64;
                    filled += 1;
                }
            }
            (row, filled)
        })
        .collect();
    let mut data = Vec::with_capacity(w * h);
    let mut filled = 0;
    for (row, f) in rows {
        data.extend(row);
        filled += f;
    }
    (DepthMap::from_raw(w, h, data), filled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapFill {
    pub depth: DepthMap,
    /// Passes that filled at least one pixel.
    pub passes: usize,
    pub remaining_zeros: usize,
}

/// Repeats [`fill_pass`] until no zeros remain, nothing changes, or
/// `max_passes` passes have run.
pub fn fill_gaps(d: &DepthMap, max_passes: usize) -> GapFill {
    let mut depth = d.clone();
    let mut zeros = depth.len() - depth.valid_count();
    let mut passes = 0;
    while zeros > 0 && passes < max_passes {
        let (next, filled) = fill_pass(&depth);
        if filled == 0 {
            break;
        }
        depth = next;
        zeros -= filled;
        passes += 1;
    }
    GapFill {
        depth,
        passes,
        remaining_zeros: zeros,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// Standard deviation in meters.
    Absolute(f64),
    /// Standard deviation as a fraction of the mean sparse depth.
    SparseMeanFraction(f64),
}

impl Default for NoiseLevel {
    fn default() -> Self {
        NoiseLevel::SparseMeanFraction(0.01)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub level: NoiseLevel,
    pub seed: u64,
    pub clamp_floor: f64,
}

impl NoiseConfig {
    pub fn absolute(sigma: f64, seed: u64) -> Self {
        Self {
            level: NoiseLevel::Absolute(sigma),
            seed,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
        }
    }

    /// Resolves the standard deviation against the real sparse map.
    pub fn sigma(&self, mask_source: &SparseDepth) -> Result<f64> {
        let sigma = match self.level {
            NoiseLevel::Absolute(s) => s,
            NoiseLevel::SparseMeanFraction(f) => match mask_source.summary() {
                Ok(s) => f * s.mean,
                Err(_) => 0.0,
            },
        };
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if !(self.clamp_floor > 0.0) {
            return Err(Error::InvalidConfig("clamp_floor must be > 0".into()));
        }
        Ok(sigma)
    }
}

/// `(d_sg + N(0, σ²)) ⊙ M_s`, clamped below at the floor on the mask.
pub fn make_sparse(
    d_sg: &DepthMap,
    mask_source: &SparseDepth,
    noise: &NoiseConfig,
) -> Result<SparseDepth> {
    d_sg.ensure_same_shape(mask_source.dims())?;
    let sigma = noise.sigma(mask_source)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = rng::stream(noise.seed, rng::NOISE_STREAM);
    let data = d_sg
        .data()
        .iter()
        .zip(mask_source.as_depth().data())
        .map(|(&d, &m)| {
            if m <= 0.0 {
                0.0
            } else if sigma == 0.0 {
                d.max(noise.clamp_floor)
            } else {
                (d + normal.sample(&mut rng)).max(noise.clamp_floor)
            }
        })
        .collect();
    Ok(SparseDepth::new(DepthMap::new(d_sg.width(), d_sg.height(), data)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub alpha_mode: AlphaMode,
    pub beta_mode: BetaMode,
    pub noise: NoiseLevel,
    pub seed: u64,
    pub clamp_floor: f64,
    pub max_passes: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            alpha_mode: AlphaMode::Formula,
            beta_mode: BetaMode::Uniform,
            noise: NoiseLevel::default(),
            seed: 0,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

/// A synthetic dense target and its noisy sparse counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub dense: DepthMap,
    pub sparse: SparseDepth,
    pub plan: RescalePlan,
    pub sigma: f64,
    pub fill_passes: usize,
    pub remaining_gaps: usize,
    pub config: PairConfig,
}

pub fn generate_pair(
    d_rel: &DepthMap,
    seg: &SegmentMap,
    d_s: &SparseDepth,
    cfg: &PairConfig,
) -> Result<SyntheticPair> {
    let mut plan = plan_rescale(d_rel, seg, d_s, cfg.alpha_mode, cfg.beta_mode, cfg.seed)?;
    plan.clamp_floor = cfg.clamp_floor;
    generate_pair_with_plan(d_rel, seg, d_s, plan, cfg)
}

/// Runs the pipeline after planning with a caller-supplied plan.
pub fn generate_pair_with_plan(
    d_rel: &DepthMap,
    seg: &SegmentMap,
    d_s: &SparseDepth,
    plan: RescalePlan,
    cfg: &PairConfig,
) -> Result<SyntheticPair> {
    if !(cfg.clamp_floor > 0.0) {
        return Err(Error::InvalidConfig("clamp_floor must be > 0".into()));
    }
    let rescaled = rescale(d_rel, seg, &plan)?;
    let filled = fill_gaps(&rescaled, cfg.max_passes);
    let noise = NoiseConfig {
        level: cfg.noise,
        seed: cfg.seed,
        clamp_floor: cfg.clamp_floor,
    };
    let sigma = noise.sigma(d_s)?;
    let sparse = make_sparse(&filled.depth, d_s, &noise)?;
    Ok(SyntheticPair {
        dense: filled.depth,
        sparse,
        plan,
        sigma,
        fill_passes: filled.passes,
        remaining_gaps: filled.remaining_zeros,
        config: *cfg,
    })
}

impl SyntheticPair {
    /// Plain-text sidecar describing how the pair was generated.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "seed = {}", c.seed);
        let _ = writeln!(s, "alpha_mode = {}", c.alpha_mode);
        let _ = writeln!(s, "beta_mode = {}", c.beta_mode);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "clamp_floor = {}", c.clamp_floor);
        let _ = writeln!(s, "sparse_mean = {}", self.plan.sparse_mean);
        let _ = writeln!(s, "max_passes = {}", c.max_passes);
        let _ = writeln!(s, "fill_passes = {}", self.fill_passes);
        let _ = writeln!(s, "remaining_gaps = {}", self.remaining_gaps);
        let _ = writeln!(s, "segments = {}", self.plan.records.len());
        let _ = writeln!(s);
        let _ = writeln!(s, "[segments]");
        let _ = writeln!(s, "label,alpha,beta,degenerate");
        for r in &self.plan.records {
            let _ = writeln!(s, "{},{},{},{}", r.label, r.alpha, r.beta, r.degenerate);
        }
        s
    }
}
