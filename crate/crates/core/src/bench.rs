//! Seeded sparsity sweep comparing the affine baselines on synthetic
//! scenes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{apply_affine, fit_global, fit_segmentwise, AffineModel};
use crate::depth::{sample_sparse, SegmentMap};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, fmt_value, MetricReport, DEFAULT_TAUS, PRED_FLOOR};
use crate::scene::{generate_scene, SceneSpec};
use crate::segmentation::{segment_from_depth, Connectivity, SegmenterConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GlobalAffine,
    SegmentAffine,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GlobalAffine => "global-affine",
            Method::SegmentAffine => "segment-affine",
        }
    }
}

/// Where the segment-wise method gets its segments from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentSource {
    /// The scene's own region labels.
    #[default]
    Oracle,
    /// The internal region grower run on the relative map.
    Depth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    pub scene: SceneSpec,
    pub sparsity: Vec<usize>,
    pub methods: Vec<Method>,
    /// Number of scenes; scene `i` uses seed `scene.seed + i`.
    pub seeds: u64,
    pub taus: Vec<f64>,
    pub segments: SegmentSource,
    pub join_threshold: f64,
    pub min_segment_pixels: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            sparsity: vec![50, 200, 500, 2000],
            methods: vec![Method::GlobalAffine, Method::SegmentAffine],
            seeds: 20,
            taus: DEFAULT_TAUS.to_vec(),
            segments: SegmentSource::Oracle,
            join_threshold: 0.05,
            min_segment_pixels: 16,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.sparsity.is_empty() || self.sparsity.contains(&0) {
            return Err(Error::InvalidConfig("sparsity values must be >= 1".into()));
        }
        if self.methods.is_empty() || self.seeds == 0 {
            return Err(Error::InvalidConfig("need at least one method and one seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub seed: u64,
    pub sparsity: usize,
    pub method: Method,
    pub report: MetricReport,
}

fn run_seed(spec: &BenchSpec, index: u64) -> Result<Vec<BenchRow>> {
    let seed = spec.scene.seed.wrapping_add(index);
    let scene = generate_scene(&SceneSpec {
        seed,
        ..spec.scene.clone()
    })?;
    let seg: SegmentMap = match spec.segments {
        SegmentSource::Oracle => scene.labels.clone(),
        SegmentSource::Depth => segment_from_depth(
            &scene.rel,
            &SegmenterConfig {
                join_threshold: spec.join_threshold,
                min_segment_pixels: spec.min_segment_pixels,
                connectivity: Connectivity::Four,
            },
        )?,
    };
    let mut rows = Vec::new();
    for &n in &spec.sparsity {
        let sparse = sample_sparse(&scene.gt, n, seed);
        for &method in &spec.methods {
            let pred = match method {
                Method::GlobalAffine => {
                    let fit = fit_global(&scene.rel, &sparse)?;
                    apply_affine(&scene.rel, AffineModel::Global(fit.params), PRED_FLOOR)?
                }
                Method::SegmentAffine => {
                    let fits = fit_segmentwise(&scene.rel, &seg, &sparse)?;
                    apply_affine(&scene.rel, AffineModel::Segmentwise { fits: &fits, seg: &seg }, PRED_FLOOR)?
                }
            };
            let report = evaluate(&pred, &scene.gt, &spec.taus, Some(&scene.labels))?;
            rows.push(BenchRow {
                seed,
                sparsity: n,
                method,
                report,
            });
        }
    }
    Ok(rows)
}

/// Runs every `(seed, sparsity, method)` cell. Rows come back sorted by
/// seed, then sparsity, then method.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let per_seed = (0..spec.seeds)
        .into_par_iter()
        .map(|i| run_seed(spec, i))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<BenchRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.seed, r.sparsity, r.method));
    Ok(rows)
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let names: Vec<String> = first.report.columns(false).into_iter().map(|c| c.0).collect();
    let _ = writeln!(out, "seed,sparsity,method,{}", names.join(","));
    for r in rows {
        let values: Vec<String> = r.report.columns(false).into_iter().map(|c| c.1).collect();
        let _ = writeln!(out, "{},{},{},{}", r.seed, r.sparsity, r.method.name(), values.join(","));
    }
    out
}

/// Seed-averaged RMSE per `(sparsity, method)`, ordered by sparsity then
/// method.
pub fn mean_rmse(rows: &[BenchRow]) -> Vec<(usize, Method, f64)> {
    let mut keys: Vec<(usize, Method)> = rows.iter().map(|r| (r.sparsity, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(n, m)| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.sparsity == n && r.method == m)
                .map(|r| r.report.rmse)
                .collect();
            (n, m, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

pub fn summary_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("sparsity  method          mean_rmse\n");
    for (n, m, v) in mean_rmse(rows) {
        let _ = writeln!(out, "{n:<8}  {:<14}  {}", m.name(), fmt_value(v));
    }
    out
}
