use std::path::Path;

use anyhow::Context;
use fuzzy_nms::pipeline::{Engine, FrameOutcome, Variant};
use fuzzy_nms::report::OutputFormat;
use fuzzy_nms::{IouMode, KittiFrame};
use serde::Serialize;

use crate::Failure;

#[derive(Serialize)]
pub struct FrameEntry {
    pub frame_id: String,
    pub input: usize,
    pub kept: usize,
    pub suppressed: usize,
    pub filtered: usize,
    pub skipped_unknown: usize,
    pub degenerate: usize,
    pub latency_ms: f64,
}

impl FrameEntry {
    pub fn new(frame: &KittiFrame, outcome: &FrameOutcome) -> Self {
        Self {
            frame_id: frame.id().to_string(),
            input: frame.frame.boxes.len(),
            kept: outcome.result.kept.len(),
            suppressed: outcome.result.suppressed.len(),
            filtered: outcome.result.filtered.len(),
            skipped_unknown: frame.skipped_unknown,
            degenerate: outcome.degenerate_count(),
            latency_ms: outcome.elapsed_ms,
        }
    }
}

#[derive(Serialize)]
pub struct Latency {
    pub mean_ms: f64,
    pub p95_ms: f64,
}

#[derive(Serialize)]
pub struct Totals {
    pub frames: usize,
    pub input: usize,
    pub kept: usize,
    pub suppressed: usize,
    pub filtered: usize,
    pub degenerate: usize,
}

/// Summary of one `run`, written next to the per-frame files.
#[derive(Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub config_hash: String,
    pub variant: Variant,
    pub iou_mode: IouMode,
    pub format: OutputFormat,
    pub input: String,
    pub bench: bool,
    pub totals: Totals,
    pub latency: Latency,
    pub frames: Vec<FrameEntry>,
}

impl Manifest {
    pub fn new(
        engine: &Engine,
        variant: &Variant,
        format: OutputFormat,
        input: &Path,
        bench: bool,
        frames: Vec<FrameEntry>,
        (mean_ms, p95_ms): (f64, f64),
    ) -> Self {
        let sum = |f: fn(&FrameEntry) -> usize| frames.iter().map(f).sum();
        let totals = Totals {
            frames: frames.len(),
            input: sum(|e| e.input),
            kept: sum(|e| e.kept),
            suppressed: sum(|e| e.suppressed),
            filtered: sum(|e| e.filtered),
            degenerate: sum(|e| e.degenerate),
        };
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: engine.config.hash(),
            variant: *variant,
            iou_mode: engine.iou_mode(),
            format,
            input: input.display().to_string(),
            bench,
            totals,
            latency: Latency { mean_ms, p95_ms },
            frames,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).context("cannot serialize manifest")?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
