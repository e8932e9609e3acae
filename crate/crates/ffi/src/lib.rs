//! C ABI over `depthkit`.
//!
//! Maps and segment maps cross the boundary as opaque handles that the
//! caller releases with the matching `*_free` function. Every fallible call
//! returns a [`DkStatus`]; on failure [`dk_last_error`] describes the
//! problem for the calling thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use depthkit::affine::{apply_affine, fit_global, fit_segmentwise, AffineModel, FitStatus};
use depthkit::depth::{normalize, sample_sparse, DepthMap, SegmentMap, SparseDepth};
use depthkit::io::{self, DepthFormat};
use depthkit::losses::{loss_breakdown, LossConfig, SsimConfig};
use depthkit::metrics::{evaluate, DEFAULT_TAUS, PRED_FLOOR};
use depthkit::scene::{generate_scene, DistortionKind, RegionKind, SceneSpec};
use depthkit::segmentation::{segment_from_depth, Connectivity, SegmenterConfig};
use depthkit::synth::{generate_pair, AlphaMode, BetaMode, NoiseLevel, PairConfig};
use depthkit::Error;

/// Opaque dense or sparse depth map.
pub struct DkDepthMap(DepthMap);

/// Opaque segment label map.
pub struct DkSegmentMap(SegmentMap);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NoValidData = 4,
    FormatError = 5,
    IoError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkDepthFormat {
    Pgm16 = 0,
    Pfm32 = 1,
    CsvPoints = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkFitStatus {
    Fitted = 0,
    Identity = 1,
    DegenerateBias = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DkAffineFit {
    pub a: f64,
    pub b: f64,
    pub status: DkFitStatus,
    pub points: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DkSegmenterConfig {
    pub join_threshold: f64,
    pub min_segment_pixels: usize,
    /// 4 or 8.
    pub connectivity: u8,
}

/// Metrics with the default thresholds 1.25, 1.25², 1.25³.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DkMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub irmse: f64,
    pub imae: f64,
    pub silog: f64,
    pub rel: f64,
    pub delta: [f64; 3],
    /// Valid only when `has_silog_segment` is nonzero.
    pub silog_segment: f64,
    pub has_silog_segment: u8,
    pub valid_pixel_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DkLoss {
    pub mse: f64,
    pub ssim: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DkPairConfig {
    /// 0 = formula, 1 = random.
    pub alpha_random: u8,
    /// 0 = uniform, 1 = zero.
    pub beta_zero: u8,
    /// Negative selects the default (1% of the mean sparse depth).
    pub sigma: f64,
    pub seed: u64,
    pub clamp_floor: f64,
    pub max_passes: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DkSceneConfig {
    pub width: usize,
    pub height: usize,
    pub regions: usize,
    pub depth_min: f64,
    pub depth_max: f64,
    /// 0 = planar, 1 = constant.
    pub constant_regions: u8,
    /// 0 = random per-region distortion, 1 = identity.
    pub identity_distortion: u8,
    pub rel_noise: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NoValidData | Error::NoQualifyingSegment => DkStatus::NoValidData,
            Error::ShapeMismatch { .. } => DkStatus::ShapeMismatch,
            Error::Format { .. } => DkStatus::FormatError,
            Error::Io(_) => DkStatus::IoError,
            _ => DkStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DkStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DkStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DkStatus::Panic
        }
    }
}

unsafe fn depth_ref<'a>(p: *const DkDepthMap, what: &str) -> Result<&'a DepthMap, Failure> {
    p.as_ref().map(|m| &m.0).ok_or_else(|| null(what))
}

unsafe fn seg_ref<'a>(p: *const DkSegmentMap, what: &str) -> Result<&'a SegmentMap, Failure> {
    p.as_ref().map(|m| &m.0).ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn format_of(f: DkDepthFormat) -> DepthFormat {
    match f {
        DkDepthFormat::Pgm16 => DepthFormat::Pgm16,
        DkDepthFormat::Pfm32 => DepthFormat::Pfm32,
        DkDepthFormat::CsvPoints => DepthFormat::CsvPoints,
    }
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `width * height` row-major values into a new map.
#[no_mangle]
pub unsafe extern "C" fn dk_depth_new(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut DkDepthMap,
) -> DkStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| invalid("dimensions overflow"))?;
        let values = std::slice::from_raw_parts(data, n).to_vec();
        put(out, DkDepthMap(DepthMap::new(width, height, values)?), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dk_depth_free(map: *mut DkDepthMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Width in pixels, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dk_depth_width(map: *const DkDepthMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.width())
}

#[no_mangle]
pub unsafe extern "C" fn dk_depth_height(map: *const DkDepthMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.height())
}

/// Copies the values into `out`, which must hold `len >= width * height`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn dk_depth_copy_data(map: *const DkDepthMap, out: *mut f64, len: usize) -> DkStatus {
    guard(|| {
        let m = depth_ref(map, "map")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < m.len() {
            return Err(invalid(format!("buffer holds {len} values, need {}", m.len())));
        }
        std::ptr::copy_nonoverlapping(m.data().as_ptr(), out, m.len());
        Ok(())
    })
}

/// Reads a depth file. `width`/`height` give the grid for `csv-points`
/// and are ignored for the image formats.
#[no_mangle]
pub unsafe extern "C" fn dk_depth_read(
    path: *const c_char,
    format: DkDepthFormat,
    width: usize,
    height: usize,
    out: *mut *mut DkDepthMap,
) -> DkStatus {
    guard(|| {
        let path = path_arg(path)?;
        let dims = (width > 0 && height > 0).then_some((width, height));
        let map = io::read_depth(&path, format_of(format), dims)?;
        put(out, DkDepthMap(map), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dk_depth_write(map: *const DkDepthMap, path: *const c_char, format: DkDepthFormat) -> DkStatus {
    guard(|| {
        let m = depth_ref(map, "map")?;
        io::write_depth(m, &path_arg(path)?, format_of(format))?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dk_normalize(map: *const DkDepthMap, out: *mut *mut DkDepthMap) -> DkStatus {
    guard(|| put(out, DkDepthMap(normalize(depth_ref(map, "map")?)?), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn dk_sample_sparse(
    gt: *const DkDepthMap,
    n: usize,
    seed: u64,
    out: *mut *mut DkDepthMap,
) -> DkStatus {
    guard(|| {
        let s = sample_sparse(depth_ref(gt, "gt")?, n, seed);
        put(out, DkDepthMap(s.into_depth()), "out")
    })
}

/// Copies a label grid. Labels must be dense in `0..=K`.
#[no_mangle]
pub unsafe extern "C" fn dk_segments_new(
    width: usize,
    height: usize,
    labels: *const u32,
    out: *mut *mut DkSegmentMap,
) -> DkStatus {
    guard(|| {
        if labels.is_null() {
            return Err(null("labels"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| invalid("dimensions overflow"))?;
        let v = std::slice::from_raw_parts(labels, n).to_vec();
        put(out, DkSegmentMap(SegmentMap::new(width, height, v)?), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dk_segments_free(seg: *mut DkSegmentMap) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Number of nonzero segments, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dk_segments_count(seg: *const DkSegmentMap) -> u32 {
    seg.as_ref().map_or(0, |s| s.0.segment_count())
}

#[no_mangle]
pub unsafe extern "C" fn dk_segments_copy_labels(seg: *const DkSegmentMap, out: *mut u32, len: usize) -> DkStatus {
    guard(|| {
        let s = seg_ref(seg, "seg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = s.labels().len();
        if len < n {
            return Err(invalid(format!("buffer holds {len} labels, need {n}")));
        }
        std::ptr::copy_nonoverlapping(s.labels().as_ptr(), out, n);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dk_segments_read(path: *const c_char, out: *mut *mut DkSegmentMap) -> DkStatus {
    guard(|| put(out, DkSegmentMap(io::read_segments(&path_arg(path)?)?), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn dk_segments_write(seg: *const DkSegmentMap, path: *const c_char) -> DkStatus {
    guard(|| {
        io::write_segments(seg_ref(seg, "seg")?, &path_arg(path)?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dk_segment_from_depth(
    rel: *const DkDepthMap,
    config: DkSegmenterConfig,
    out: *mut *mut DkSegmentMap,
) -> DkStatus {
    guard(|| {
        let cfg = SegmenterConfig {
            join_threshold: config.join_threshold,
            min_segment_pixels: config.min_segment_pixels,
            connectivity: match config.connectivity {
                4 => Connectivity::Four,
                8 => Connectivity::Eight,
                c => return Err(invalid(format!("connectivity must be 4 or 8, got {c}"))),
            },
        };
        put(out, DkSegmentMap(segment_from_depth(depth_ref(rel, "rel")?, &cfg)?), "out")
    })
}

fn fit_status(s: FitStatus) -> DkFitStatus {
    match s {
        FitStatus::Fitted => DkFitStatus::Fitted,
        FitStatus::Identity => DkFitStatus::Identity,
        FitStatus::DegenerateBias => DkFitStatus::DegenerateBias,
    }
}

/// Least-squares scale and bias from relative depth to the sparse points.
#[no_mangle]
pub unsafe extern "C" fn dk_fit_global(
    rel: *const DkDepthMap,
    sparse: *const DkDepthMap,
    out: *mut DkAffineFit,
) -> DkStatus {
    guard(|| {
        let rel = depth_ref(rel, "rel")?;
        let sparse = SparseDepth::new(depth_ref(sparse, "sparse")?.clone());
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let fit = fit_global(rel, &sparse)?;
        *out = DkAffineFit {
            a: fit.params.a,
            b: fit.params.b,
            status: fit_status(fit.status),
            points: fit.points,
        };
        Ok(())
    })
}

/// Completes `rel` with an affine fit: global when `seg` is null,
/// per segment otherwise.
#[no_mangle]
pub unsafe extern "C" fn dk_complete_affine(
    rel: *const DkDepthMap,
    sparse: *const DkDepthMap,
    seg: *const DkSegmentMap,
    out: *mut *mut DkDepthMap,
) -> DkStatus {
    guard(|| {
        let rel = depth_ref(rel, "rel")?;
        let sparse = SparseDepth::new(depth_ref(sparse, "sparse")?.clone());
        let pred = match seg.as_ref() {
            None => {
                let fit = fit_global(rel, &sparse)?;
                apply_affine(rel, AffineModel::Global(fit.params), PRED_FLOOR)?
            }
            Some(s) => {
                let fits = fit_segmentwise(rel, &s.0, &sparse)?;
                apply_affine(rel, AffineModel::Segmentwise { fits: &fits, seg: &s.0 }, PRED_FLOOR)?
            }
        };
        put(out, DkDepthMap(pred), "out")
    })
}

/// Metric suite; `seg` may be null to skip segment SILog.
#[no_mangle]
pub unsafe extern "C" fn dk_evaluate(
    pred: *const DkDepthMap,
    gt: *const DkDepthMap,
    seg: *const DkSegmentMap,
    out: *mut DkMetrics,
) -> DkStatus {
    guard(|| {
        let pred = depth_ref(pred, "pred")?;
        let gt = depth_ref(gt, "gt")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = evaluate(pred, gt, &DEFAULT_TAUS, seg.as_ref().map(|s| &s.0))?;
        *out = DkMetrics {
            rmse: r.rmse,
            mae: r.mae,
            irmse: r.irmse,
            imae: r.imae,
            silog: r.silog,
            rel: r.rel,
            delta: [r.delta[0].1, r.delta[1].1, r.delta[2].1],
            silog_segment: r.silog_segment.unwrap_or(0.0),
            has_silog_segment: u8::from(r.silog_segment.is_some()),
            valid_pixel_count: r.valid_pixel_count,
        };
        Ok(())
    })
}

/// MSE + `lambda`·SSIM loss with the default 11×11 window.
#[no_mangle]
pub unsafe extern "C" fn dk_total_loss(
    pred: *const DkDepthMap,
    target: *const DkDepthMap,
    lambda: f64,
    out: *mut DkLoss,
) -> DkStatus {
    guard(|| {
        let pred = depth_ref(pred, "pred")?;
        let target = depth_ref(target, "target")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let parts = loss_breakdown(pred, target, &LossConfig { lambda }, &SsimConfig::default())?;
        *out = DkLoss {
            mse: parts.mse,
            ssim: parts.ssim,
            total: parts.total,
        };
        Ok(())
    })
}

/// Synthetic pair from a relative map, its segments and a real sparse map.
#[no_mangle]
pub unsafe extern "C" fn dk_generate_pair(
    rel: *const DkDepthMap,
    seg: *const DkSegmentMap,
    sparse: *const DkDepthMap,
    config: DkPairConfig,
    out_dense: *mut *mut DkDepthMap,
    out_sparse: *mut *mut DkDepthMap,
) -> DkStatus {
    guard(|| {
        if out_dense.is_null() || out_sparse.is_null() {
            return Err(null("output"));
        }
        let rel = depth_ref(rel, "rel")?;
        let seg = seg_ref(seg, "seg")?;
        let sparse = SparseDepth::new(depth_ref(sparse, "sparse")?.clone());
        let cfg = PairConfig {
            alpha_mode: if config.alpha_random != 0 { AlphaMode::Random } else { AlphaMode::Formula },
            beta_mode: if config.beta_zero != 0 { BetaMode::Zero } else { BetaMode::Uniform },
            noise: if config.sigma < 0.0 {
                NoiseLevel::default()
            } else {
                NoiseLevel::Absolute(config.sigma)
            },
            seed: config.seed,
            clamp_floor: config.clamp_floor,
            max_passes: config.max_passes,
        };
        let pair = generate_pair(rel, seg, &sparse, &cfg)?;
        put(out_dense, DkDepthMap(pair.dense), "out_dense")?;
        put(out_sparse, DkDepthMap(pair.sparse.into_depth()), "out_sparse")
    })
}

/// Generates a synthetic scene. All three outputs are required.
#[no_mangle]
pub unsafe extern "C" fn dk_generate_scene(
    config: DkSceneConfig,
    out_gt: *mut *mut DkDepthMap,
    out_labels: *mut *mut DkSegmentMap,
    out_rel: *mut *mut DkDepthMap,
) -> DkStatus {
    guard(|| {
        if out_gt.is_null() || out_labels.is_null() || out_rel.is_null() {
            return Err(null("output"));
        }
        let spec = SceneSpec {
            width: config.width,
            height: config.height,
            regions: config.regions,
            depth_range: [config.depth_min, config.depth_max],
            region_kind: if config.constant_regions != 0 { RegionKind::Constant } else { RegionKind::Planar },
            distortion: if config.identity_distortion != 0 {
                DistortionKind::Identity
            } else {
                DistortionKind::Random
            },
            rel_noise: config.rel_noise,
            seed: config.seed,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec)?;
        put(out_gt, DkDepthMap(scene.gt), "out_gt")?;
        put(out_labels, DkSegmentMap(scene.labels), "out_labels")?;
        put(out_rel, DkDepthMap(scene.rel), "out_rel")
    })
}
