//! Density- and volume-aware non-maximum suppression for 3D object detection.
//!
//! Candidate boxes are clustered by center ([`clustering`]), classified from
//! (density, volume) by a Mamdani fuzzy system ([`fuzzy`]) and suppressed with
//! per-category thresholds ([`nms`]). [`kitti`] and [`config`] handle file
//! formats, [`eval`] scores variants with KITTI-style average precision,
//! [`pipeline`] glues the steps together for a single frame and [`report`]
//! writes per-frame results.

pub mod clustering;
pub mod config;
pub mod eval;
pub mod fuzzy;
pub mod geometry;
pub mod kitti;
pub mod nms;
pub mod pipeline;
pub mod report;

pub use clustering::{ClusterAssignment, DbscanParams};
pub use config::{load_config, ToolkitConfig};
pub use eval::{EvalSpec, MetricsTable};
pub use fuzzy::{BoxAnalysis, BoxCategory, Category, FuzzySystem};
pub use geometry::{Box3D, Frame, IouMode};
pub use kitti::{parse_frame, KittiFrame, KittiRecord};
pub use nms::{NmsConfig, NmsResult};
pub use pipeline::{Engine, FrameOutcome, Variant};
pub use report::{write_results, OutputFormat};
