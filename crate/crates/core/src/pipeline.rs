//! End-to-end processing of one frame with a chosen suppression variant.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering;
use crate::config::ToolkitConfig;
use crate::eval::{evaluate, latency_stats, EvalSpec, MetricsRow, MetricsTable};
use crate::fuzzy::{BoxAnalysis, FuzzyError, FuzzySystem};
use crate::geometry::{Box3D, Frame, IouMode};
use crate::kitti::KittiFrame;
use crate::nms::{self, Kept, NmsError, NmsResult, SoftNmsParams, Suppressed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Nms(#[from] NmsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Variant {
    Traditional { iou: f64 },
    Soft(SoftNmsParams),
    Diou { iou: f64 },
    Fuzzy,
}

impl Variant {
    pub const NAMES: [&'static str; 4] = ["traditional", "soft", "diou", "fuzzy"];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Traditional { .. } => "traditional",
            Variant::Soft(_) => "soft",
            Variant::Diou { .. } => "diou",
            Variant::Fuzzy => "fuzzy",
        }
    }
}

/// Result of one variant on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub result: NmsResult,
    /// Fuzzy classification per input box; `None` for baselines and for boxes
    /// removed by the pre-filter.
    pub analysis: Vec<Option<BoxAnalysis>>,
    /// Wall-clock time of clustering, inference and suppression.
    pub elapsed_ms: f64,
}

impl FrameOutcome {
    pub fn kept_pairs(&self) -> Vec<(usize, f64)> {
        self.result.kept.iter().map(|k| (k.index, k.score)).collect()
    }

    pub fn degenerate_count(&self) -> usize {
        self.analysis.iter().flatten().filter(|a| a.degenerate).count()
    }
}

/// Validated configuration plus the prebuilt inference engine.
#[derive(Debug, Clone)]
pub struct Engine {
    pub config: ToolkitConfig,
    pub system: FuzzySystem,
}

impl Engine {
    pub fn new(config: ToolkitConfig) -> Result<Self, FuzzyError> {
        let system = config.fuzzy_system()?;
        Ok(Self { config, system })
    }

    pub fn iou_mode(&self) -> IouMode {
        self.config.nms.iou_mode
    }

    /// Clusters the frame and classifies every box.
    pub fn analyze(&self, frame: &Frame) -> Result<Vec<BoxAnalysis>, FuzzyError> {
        let assignment = clustering::estimate(frame, &self.config.dbscan);
        self.system.classify_boxes(frame, &assignment)
    }

    pub fn run(&self, frame: &Frame, variant: &Variant) -> Result<FrameOutcome, PipelineError> {
        let start = Instant::now();
        let (result, analysis) = self.run_untimed(frame, variant)?;
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(FrameOutcome { result, analysis, elapsed_ms })
    }

    fn run_untimed(&self, frame: &Frame, variant: &Variant) -> Result<(NmsResult, Vec<Option<BoxAnalysis>>), PipelineError> {
        let cutoff = self.config.nms.pre_filter_score;
        let (passing, rejected): (Vec<usize>, Vec<usize>) =
            (0..frame.boxes.len()).partition(|&i| cutoff.is_none_or(|t| frame.boxes[i].score >= t));
        let sub: Vec<Box3D> = passing.iter().map(|&i| frame.boxes[i]).collect();
        let scores: Vec<f64> = sub.iter().map(|b| b.score).collect();
        let mode = self.iou_mode();

        let mut analysis = vec![None; frame.boxes.len()];
        let result = match variant {
            Variant::Traditional { iou } => nms::traditional_nms(&sub, &scores, *iou, mode),
            Variant::Diou { iou } => nms::diou_nms(&sub, &scores, *iou, mode),
            Variant::Soft(params) => nms::soft_nms(&sub, &scores, &SoftNmsParams { iou_mode: mode, ..*params })?,
            Variant::Fuzzy => {
                let sub_frame = Frame::new(frame.frame_id.clone(), sub);
                let per_box = self.analyze(&sub_frame)?;
                let categories: Vec<_> = per_box.iter().map(|a| a.category).collect();
                for (&i, a) in passing.iter().zip(&per_box) {
                    analysis[i] = Some(*a);
                }
                nms::fuzzy_nms(&sub_frame, &categories, &self.config.nms)?
            }
        };
        Ok((remap(result, &passing, rejected), analysis))
    }
}

/// Maps sub-frame indices back to the input frame and records pre-filtered boxes.
fn remap(r: NmsResult, passing: &[usize], rejected: Vec<usize>) -> NmsResult {
    let mut filtered: Vec<usize> = r.filtered.iter().map(|&i| passing[i]).chain(rejected).collect();
    filtered.sort_unstable();
    NmsResult {
        kept: r.kept.iter().map(|k| Kept { index: passing[k.index], score: k.score }).collect(),
        suppressed: r.suppressed.iter().map(|s| Suppressed { index: passing[s.index], by: passing[s.by] }).collect(),
        filtered,
        category_counts: r.category_counts,
        scores: r.scores,
    }
}

/// Per-variant summary for a set of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantRun {
    pub label: String,
    pub outcomes: Vec<FrameOutcome>,
}

impl VariantRun {
    pub fn totals(&self) -> (usize, usize, usize) {
        self.outcomes.iter().fold((0, 0, 0), |(k, s, f), o| {
            (k + o.result.kept.len(), s + o.result.suppressed.len(), f + o.result.filtered.len())
        })
    }

    pub fn latencies(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.elapsed_ms).collect()
    }
}

pub fn run_variant(engine: &Engine, frames: &[KittiFrame], label: &str, variant: &Variant) -> Result<VariantRun, PipelineError> {
    let outcomes = frames.iter().map(|f| engine.run(&f.frame, variant)).collect::<Result<Vec<_>, _>>()?;
    Ok(VariantRun { label: label.to_string(), outcomes })
}

/// AP rows (3D then BEV) for every run, in the order given. Without frames
/// there is nothing to score and the table has no rows.
pub fn metrics_table(frames: &[KittiFrame], runs: &[VariantRun], spec: &EvalSpec) -> MetricsTable {
    let columns = spec.ap_columns();
    if frames.is_empty() {
        return MetricsTable { columns, rows: Vec::new() };
    }
    let mut rows = Vec::new();
    for run in runs {
        let kept: Vec<Vec<(usize, f64)>> = run.outcomes.iter().map(FrameOutcome::kept_pairs).collect();
        let (k, s, f) = run.totals();
        let (mean_ms, p95_ms) = latency_stats(&run.latencies());
        for mode in [IouMode::ThreeD, IouMode::Bev] {
            rows.push(MetricsRow {
                method: run.label.clone(),
                metric: mode.as_str().to_string(),
                table: evaluate(frames, &kept, spec, mode),
                kept: k,
                suppressed: s,
                filtered: f,
                mean_ms,
                p95_ms,
            });
        }
    }
    MetricsTable { columns, rows }
}

/// Runs every variant over the same frames and tabulates AP and latency.
pub fn compare_runs(
    engine: &Engine,
    frames: &[KittiFrame],
    variants: &[(String, Variant)],
    spec: &EvalSpec,
) -> Result<MetricsTable, PipelineError> {
    let runs = variants
        .iter()
        .map(|(label, v)| run_variant(engine, frames, label, v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(metrics_table(frames, &runs, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Frame {
        let mut boxes = Vec::new();
        for i in 0..6 {
            let s = 0.9 - 0.1 * i as f64;
            boxes.push(Box3D::new([0.05 * i as f64, 0.0, 0.0], [4.0, 1.8, 1.6], 0.0, 0, s).unwrap());
        }
        boxes.push(Box3D::new([30.0, 0.0, 0.0], [0.6, 0.6, 1.7], 0.0, 1, 0.05).unwrap());
        Frame::new("0", boxes)
    }

    #[test]
    fn fuzzy_partitions_input() {
        let engine = Engine::new(ToolkitConfig::default()).unwrap();
        let out = engine.run(&frame(), &Variant::Fuzzy).unwrap();
        assert_eq!(out.result.len_total(), 7);
        assert!(out.analysis.iter().all(Option::is_some));
        assert_eq!(out.result.kept_indices(), vec![0]);
        // The isolated low-score box is LD and falls below the 0.1 score threshold.
        assert_eq!(out.result.filtered, vec![6]);
    }

    #[test]
    fn pre_filter_removes_before_clustering() {
        let mut cfg = ToolkitConfig::default();
        cfg.nms.pre_filter_score = Some(0.45);
        let engine = Engine::new(cfg).unwrap();
        let out = engine.run(&frame(), &Variant::Fuzzy).unwrap();
        assert_eq!(out.result.filtered, vec![5, 6]);
        assert!(out.analysis[5].is_none() && out.analysis[6].is_none());
        assert_eq!(out.result.len_total(), 7);
    }

    #[test]
    fn traditional_matches_library() {
        let engine = Engine::new(ToolkitConfig::default()).unwrap();
        let f = frame();
        let out = engine.run(&f, &Variant::Traditional { iou: 0.5 }).unwrap();
        assert_eq!(out.result, nms::traditional_nms(&f.boxes, &f.scores(), 0.5, IouMode::Bev));
        assert!(out.analysis.iter().all(Option::is_none));
    }
}
