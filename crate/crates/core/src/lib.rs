//! Numerics for sparse-to-dense depth completion.
//!
//! The crate covers the pieces around a depth-completion network that can
//! be checked without one: segment-wise rescaling of relative depth into
//! synthetic training pairs, global and per-segment affine baselines, the
//! MSE + SSIM objective, the usual evaluation metrics, and a synthetic
//! scene generator with known ground truth.

pub mod affine;
pub mod bench;
pub mod depth;
pub mod error;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod rng;
pub mod scene;
pub mod segmentation;
pub mod synth;

pub use affine::{apply_affine, fit_global, fit_segmentwise, AffineFit, AffineModel, AffineParams, FitStatus, SegmentAffine};
pub use depth::{normalize, sample_sparse, segment_stats, DepthMap, GrayImage, SegmentMap, SegmentStats, SparseDepth};
pub use error::{Error, Result};
pub use metrics::{evaluate, silog, silog_segment, MetricReport};
pub use scene::{generate_scene, Scene, SceneSpec};
pub use segmentation::{segment_from_depth, segment_from_gray, SegmenterConfig};
pub use synth::{generate_pair, AlphaMode, PairConfig, SyntheticPair};
