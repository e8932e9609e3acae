//! Training objective: MSE, windowed SSIM and their weighted sum.

use rayon::prelude::*;

use crate::depth::DepthMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Side of the square averaging window; odd, at least 3.
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the inputs.
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::InvalidConfig("k1, k2 and dynamic range must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 3.0 }
    }
}

/// Mean squared difference over every pixel.
pub fn mse_loss(pred: &DepthMap, target: &DepthMap) -> Result<f64> {
    pred.ensure_same_shape(target.dims())?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Mean squared difference over pixels where `target > 0`.
pub fn masked_mse_loss(pred: &DepthMap, target: &DepthMap) -> Result<f64> {
    pred.ensure_same_shape(target.dims())?;
    let (sum, n) = pred
        .data()
        .iter()
        .zip(target.data())
        .filter(|(_, t)| **t > 0.0)
        .fold((0.0, 0usize), |(s, n), (p, t)| (s + (p - t) * (p - t), n + 1));
    if n == 0 {
        return Err(Error::NoValidData);
    }
    Ok(sum / n as f64)
}

/// Gradient of [`mse_loss`] with respect to each prediction pixel.
pub fn mse_gradient(pred: &DepthMap, target: &DepthMap) -> Result<Vec<f64>> {
    pred.ensure_same_shape(target.dims())?;
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect())
}

/// Mirror index without repeating the edge sample (`-1 → 1`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period.max(1));
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Box-filtered means of the five SSIM moment fields (x, y, x², y², xy).
fn window_means(x: &[f64], y: &[f64], w: usize, h: usize, win: usize) -> [Vec<f64>; 5] {
    let r = (win / 2) as isize;
    let inv = 1.0 / (win * win) as f64;
    let fields = |i: usize| -> [f64; 5] {
        let (a, b) = (x[i], y[i]);
        [a, b, a * a, b * b, a * b]
    };
    // horizontal pass over reflected columns
    let horiz: Vec<[f64; 5]> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..w).map(move |col| {
                let mut acc = [0.0; 5];
                for dc in -r..=r {
                    let c = reflect(col as isize + dc, w);
                    let f = fields(row * w + c);
                    for k in 0..5 {
                        acc[k] += f[k];
                    }
                }
                acc
            })
        })
        .collect();
    let mut out: [Vec<f64>; 5] = Default::default();
    for o in out.iter_mut() {
        o.reserve(w * h);
    }
    let vert: Vec<[f64; 5]> = (0..h)
        .into_par_iter()
        .flat_map_iter(|row| {
            let horiz = &horiz;
            (0..w).map(move |col| {
                let mut acc = [0.0; 5];
                for dr in -r..=r {
                    let rr = reflect(row as isize + dr, h);
                    let f = horiz[rr * w + col];
                    for k in 0..5 {
                        acc[k] += f[k];
                    }
                }
                acc.map(|v| v * inv)
            })
        })
        .collect();
    for v in vert {
        for k in 0..5 {
            out[k].push(v[k]);
        }
    }
    out
}

/// Per-pixel SSIM with uniform-window moments and reflect padding.
///
/// Inputs are expected in `[0, dynamic_range]`.
pub fn ssim_map(pred: &DepthMap, target: &DepthMap, cfg: &SsimConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    pred.ensure_same_shape(target.dims())?;
    let (w, h) = pred.dims();
    if w < cfg.window || h < cfg.window {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            window: cfg.window,
        });
    }
    let [mx, my, mxx, myy, mxy] = window_means(pred.data(), target.data(), w, h, cfg.window);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    Ok((0..w * h)
        .map(|i| {
            let vx = mxx[i] - mx[i] * mx[i];
            let vy = myy[i] - my[i] * my[i];
            let cov = mxy[i] - mx[i] * my[i];
            let num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
            let den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
            (num / den).clamp(-1.0, 1.0)
        })
        .collect())
}

/// `1 − mean(SSIM map)`, in `[0, 2]`.
pub fn ssim_loss(pred: &DepthMap, target: &DepthMap, cfg: &SsimConfig) -> Result<f64> {
    let map = ssim_map(pred, target, cfg)?;
    Ok(1.0 - map.iter().sum::<f64>() / map.len() as f64)
}

/// Rescales both maps by their joint `[min, max]` to `[0, 1]`. A constant
/// pair maps to 0.5 everywhere.
pub fn normalize_pair(a: &DepthMap, b: &DepthMap) -> Result<(DepthMap, DepthMap)> {
    a.ensure_same_shape(b.dims())?;
    let (lo, hi) = a
        .data()
        .iter()
        .chain(b.data())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let f = |m: &DepthMap| {
        let data = m
            .data()
            .iter()
            .map(|&v| if range > 0.0 { ((v - lo) / range).clamp(0.0, 1.0) } else { 0.5 })
            .collect();
        DepthMap::new(m.width(), m.height(), data)
    };
    Ok((f(a)?, f(b)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub mse: f64,
    pub ssim: f64,
    pub total: f64,
}

/// `mse + λ·ssim_loss`, MSE on raw depths and SSIM on the jointly
/// normalized pair.
pub fn loss_breakdown(
    pred: &DepthMap,
    target: &DepthMap,
    loss: &LossConfig,
    ssim: &SsimConfig,
) -> Result<LossBreakdown> {
    if !(loss.lambda >= 0.0 && loss.lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", loss.lambda)));
    }
    let mse = mse_loss(pred, target)?;
    let (p, t) = normalize_pair(pred, target)?;
    let s = ssim_loss(&p, &t, ssim)?;
    Ok(LossBreakdown {
        mse,
        ssim: s,
        total: mse + loss.lambda * s,
    })
}

pub fn total_loss(pred: &DepthMap, target: &DepthMap, loss: &LossConfig, ssim: &SsimConfig) -> Result<f64> {
    Ok(loss_breakdown(pred, target, loss, ssim)?.total)
}
