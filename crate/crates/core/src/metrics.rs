//! Depth evaluation metrics over the pixels where ground truth is valid.
//!
//! Predictions are clamped below at [`PRED_FLOOR`] before the inverse,
//! log and ratio metrics. Inverse metrics are reported in 1/km.

use std::fmt::Write as _;

use crate::depth::{DepthMap, SegmentMap};
use crate::error::{Error, Result};

pub const PRED_FLOOR: f64 = 1e-3;
pub const DEFAULT_TAUS: [f64; 3] = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub irmse: f64,
    pub imae: f64,
    pub silog: f64,
    pub rel: f64,
    /// `(τ, fraction)` pairs in the order requested.
    pub delta: Vec<(f64, f64)>,
    pub silog_segment: Option<f64>,
    pub valid_pixel_count: usize,
}

/// Running sums from which every metric follows. Adding sums from several
/// images gives the pixel-pooled metrics.
#[derive(Debug, Clone, PartialEq)]
struct PixelSums {
    n: usize,
    sq: f64,
    abs: f64,
    inv_sq: f64,
    inv_abs: f64,
    log: f64,
    log_sq: f64,
    rel: f64,
    delta_hits: Vec<usize>,
}

impl PixelSums {
    fn new(taus: usize) -> Self {
        Self {
            n: 0,
            sq: 0.0,
            abs: 0.0,
            inv_sq: 0.0,
            inv_abs: 0.0,
            log: 0.0,
            log_sq: 0.0,
            rel: 0.0,
            delta_hits: vec![0; taus],
        }
    }

    fn push(&mut self, pred: f64, gt: f64, taus: &[f64]) {
        let p = pred.max(PRED_FLOOR);
        let e = gt - pred;
        let ie = 1.0 / gt - 1.0 / p;
        let l = p.ln() - gt.ln();
        self.n += 1;
        self.sq += e * e;
        self.abs += e.abs();
        self.inv_sq += ie * ie;
        self.inv_abs += ie.abs();
        self.log += l;
        self.log_sq += l * l;
        self.rel += (e / gt).abs();
        let ratio = (gt / p).max(p / gt);
        for (hit, &tau) in self.delta_hits.iter_mut().zip(taus) {
            if ratio < tau {
                *hit += 1;
            }
        }
    }

    fn merge(&mut self, other: &PixelSums) {
        self.n += other.n;
        self.sq += other.sq;
        self.abs += other.abs;
        self.inv_sq += other.inv_sq;
        self.inv_abs += other.inv_abs;
        self.log += other.log;
        self.log_sq += other.log_sq;
        self.rel += other.rel;
        for (a, b) in self.delta_hits.iter_mut().zip(&other.delta_hits) {
            *a += b;
        }
    }

    fn silog(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.log / n;
        (self.log_sq / n - mean * mean).max(0.0)
    }

    fn report(&self, taus: &[f64], silog_segment: Option<f64>) -> MetricReport {
        let n = self.n as f64;
        MetricReport {
            rmse: (self.sq / n).sqrt(),
            mae: self.abs / n,
            irmse: (self.inv_sq / n).sqrt() * 1000.0,
            imae: self.inv_abs / n * 1000.0,
            silog: self.silog(),
            rel: self.rel / n,
            delta: taus
                .iter()
                .zip(&self.delta_hits)
                .map(|(&t, &h)| (t, h as f64 / n))
                .collect(),
            silog_segment,
            valid_pixel_count: self.n,
        }
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if let Some(t) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidConfig(format!("threshold τ must be finite and > 0, got {t}")));
    }
    Ok(())
}

fn image_sums(pred: &DepthMap, gt: &DepthMap, taus: &[f64]) -> Result<PixelSums> {
    gt.ensure_same_shape(pred.dims())?;
    let mut sums = PixelSums::new(taus.len());
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if g > 0.0 {
            sums.push(p, g, taus);
        }
    }
    if sums.n == 0 {
        return Err(Error::NoValidData);
    }
    Ok(sums)
}

/// Per-segment SILog values for segments with at least two valid pixels.
fn segment_silogs(pred: &DepthMap, gt: &DepthMap, seg: &SegmentMap) -> Result<Vec<f64>> {
    gt.ensure_same_shape(pred.dims())?;
    gt.ensure_same_shape(seg.dims())?;
    let mut sums = vec![PixelSums::new(0); seg.segment_count() as usize + 1];
    for ((&p, &g), &l) in pred.data().iter().zip(gt.data()).zip(seg.labels()) {
        if l != 0 && g > 0.0 {
            sums[l as usize].push(p, g, &[]);
        }
    }
    Ok(sums
        .iter()
        .skip(1)
        .filter(|s| s.n >= 2)
        .map(PixelSums::silog)
        .collect())
}

/// Full metric suite for one prediction.
pub fn evaluate(
    pred: &DepthMap,
    gt: &DepthMap,
    taus: &[f64],
    seg: Option<&SegmentMap>,
) -> Result<MetricReport> {
    check_taus(taus)?;
    let sums = image_sums(pred, gt, taus)?;
    let silog_segment = seg.map(|s| silog_segment(pred, gt, s)).transpose()?;
    Ok(sums.report(taus, silog_segment))
}

/// Scale-invariant log error: variance of `ln pred − ln gt` over valid
/// ground truth.
pub fn silog(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    Ok(image_sums(pred, gt, &[])?.silog())
}

/// Unweighted mean of per-segment SILog over segments with at least two
/// valid pixels.
pub fn silog_segment(pred: &DepthMap, gt: &DepthMap, seg: &SegmentMap) -> Result<f64> {
    let values = segment_silogs(pred, gt, seg)?;
    if values.is_empty() {
        return Err(Error::NoQualifyingSegment);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// How to combine several images into one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean of per-image metrics.
    #[default]
    PerImage,
    /// Metrics over the union of all valid pixels; segment SILog averages
    /// over every qualifying segment of every image.
    Pooled,
}

/// One evaluation sample: prediction, ground truth, optional segments.
pub type EvalItem<'a> = (&'a DepthMap, &'a DepthMap, Option<&'a SegmentMap>);

/// Aggregates a list of images. Segment SILog is reported only when every
/// item carries a segment map.
pub fn evaluate_many(items: &[EvalItem<'_>], taus: &[f64], mode: Aggregation) -> Result<MetricReport> {
    check_taus(taus)?;
    if items.is_empty() {
        return Err(Error::NoValidData);
    }
    let with_seg = items.iter().all(|i| i.2.is_some());
    match mode {
        Aggregation::PerImage => {
            let reports = items
                .iter()
                .map(|&(p, g, s)| evaluate(p, g, taus, if with_seg { s } else { None }))
                .collect::<Result<Vec<_>>>()?;
            Ok(mean_report(&reports))
        }
        Aggregation::Pooled => {
            let mut total = PixelSums::new(taus.len());
            let mut seg_values = Vec::new();
            for &(p, g, s) in items {
                total.merge(&image_sums(p, g, taus)?);
                if let (true, Some(s)) = (with_seg, s) {
                    seg_values.extend(segment_silogs(p, g, s)?);
                }
            }
            let silog_segment = if with_seg {
                if seg_values.is_empty() {
                    return Err(Error::NoQualifyingSegment);
                }
                Some(seg_values.iter().sum::<f64>() / seg_values.len() as f64)
            } else {
                None
            };
            Ok(total.report(taus, silog_segment))
        }
    }
}

/// Field-wise mean of reports that share the same thresholds.
pub fn mean_report(reports: &[MetricReport]) -> MetricReport {
    assert!(!reports.is_empty(), "mean of zero reports");
    let n = reports.len() as f64;
    let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let delta = reports[0]
        .delta
        .iter()
        .enumerate()
        .map(|(i, &(t, _))| (t, reports.iter().map(|r| r.delta[i].1).sum::<f64>() / n))
        .collect();
    let silog_segment = reports
        .iter()
        .map(|r| r.silog_segment)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / n);
    MetricReport {
        rmse: avg(|r| r.rmse),
        mae: avg(|r| r.mae),
        irmse: avg(|r| r.irmse),
        imae: avg(|r| r.imae),
        silog: avg(|r| r.silog),
        rel: avg(|r| r.rel),
        delta,
        silog_segment,
        valid_pixel_count: reports.iter().map(|r| r.valid_pixel_count).sum(),
    }
}

/// Output layout for metric tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Table,
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            _ => Err(Error::InvalidConfig(format!("unknown table format `{s}`"))),
        }
    }
}

impl MetricReport {
    /// Named columns in display order. `scale100` multiplies the SILog
    /// columns by 100.
    pub fn columns(&self, scale100: bool) -> Vec<(String, String)> {
        let k = if scale100 { 100.0 } else { 1.0 };
        let mut cols = vec![
            ("valid_pixels".to_string(), self.valid_pixel_count.to_string()),
            ("rmse".into(), fmt_value(self.rmse)),
            ("mae".into(), fmt_value(self.mae)),
            ("irmse".into(), fmt_value(self.irmse)),
            ("imae".into(), fmt_value(self.imae)),
            ("silog".into(), fmt_value(self.silog * k)),
            ("rel".into(), fmt_value(self.rel)),
        ];
        for (t, v) in &self.delta {
            cols.push((format!("delta_{t}"), fmt_value(*v)));
        }
        if let Some(s) = self.silog_segment {
            cols.push(("silog_segment".into(), fmt_value(s * k)));
        }
        cols
    }

    pub fn render(&self, format: TableFormat, scale100: bool) -> String {
        let cols = self.columns(scale100);
        let mut out = String::new();
        match format {
            TableFormat::Csv => {
                let names: Vec<_> = cols.iter().map(|c| c.0.as_str()).collect();
                let values: Vec<_> = cols.iter().map(|c| c.1.as_str()).collect();
                let _ = writeln!(out, "{}", names.join(","));
                let _ = writeln!(out, "{}", values.join(","));
            }
            TableFormat::Markdown => {
                let _ = writeln!(out, "| metric | value |");
                let _ = writeln!(out, "|---|---|");
                for (name, value) in &cols {
                    let _ = writeln!(out, "| {name} | {value} |");
                }
            }
            TableFormat::Table => {
                let width = cols.iter().map(|c| c.0.len()).max().unwrap_or(0);
                for (name, value) in &cols {
                    let _ = writeln!(out, "{name:<width$}  {value}");
                }
            }
        }
        out
    }
}

/// Fixed precision so that reports are byte-stable.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.9}")
}
