//! Per-frame result files in KITTI, JSON or CSV form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fuzzy::Category;
use crate::geometry::IouMode;
use crate::kitti::{detection_lines, KittiFrame};
use crate::nms::ScoreProvenance;
use crate::pipeline::FrameOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Kitti,
    Json,
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Kitti => "txt",
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kitti" => Ok(OutputFormat::Kitti),
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected kitti, json or csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxStatus {
    Kept,
    Suppressed,
    Filtered,
}

/// One input box and what happened to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    pub index: usize,
    #[serde(rename = "type")]
    pub kind: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub rotation_y: f64,
    pub score: f64,
    pub status: BoxStatus,
    pub output_score: Option<f64>,
    pub suppressed_by: Option<usize>,
    pub cluster_id: Option<u32>,
    pub density: Option<f64>,
    pub volume: Option<f64>,
    #[serde(rename = "v_O")]
    pub v_o: Option<f64>,
    pub category: Option<Category>,
    pub degenerate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_id: String,
    pub variant: String,
    pub iou_mode: IouMode,
    pub scores: ScoreProvenance,
    pub boxes: Vec<BoxReport>,
}

pub fn box_reports(frame: &KittiFrame, outcome: &FrameOutcome) -> Vec<BoxReport> {
    let n = frame.frame.boxes.len();
    let mut status = vec![(BoxStatus::Filtered, None, None); n];
    for k in &outcome.result.kept {
        status[k.index] = (BoxStatus::Kept, Some(k.score), None);
    }
    for s in &outcome.result.suppressed {
        status[s.index] = (BoxStatus::Suppressed, None, Some(s.by));
    }
    (0..n)
        .map(|i| {
            let rec = &frame.detections[i];
            let a = outcome.analysis.get(i).copied().flatten();
            let (st, output_score, suppressed_by) = status[i];
            BoxReport {
                index: i,
                kind: rec.kind.clone(),
                x: rec.x,
                y: rec.y,
                z: rec.z,
                h: rec.h,
                w: rec.w,
                l: rec.l,
                rotation_y: rec.rotation_y,
                score: frame.frame.boxes[i].score,
                status: st,
                output_score,
                suppressed_by,
                cluster_id: a.map(|a| a.cluster_id),
                density: a.map(|a| a.density),
                volume: a.map(|a| a.volume),
                v_o: a.map(|a| a.v_o),
                category: a.map(|a| a.category),
                degenerate: a.map(|a| a.degenerate),
            }
        })
        .collect()
}

/// Serializes one frame's outcome. KITTI output lists kept boxes only, in
/// score order; JSON and CSV list every input box.
pub fn render(
    frame: &KittiFrame,
    outcome: &FrameOutcome,
    variant: &str,
    iou_mode: IouMode,
    format: OutputFormat,
) -> Result<String, String> {
    match format {
        OutputFormat::Kitti => Ok(detection_lines(frame, &outcome.kept_pairs())),
        OutputFormat::Json => {
            let report = FrameReport {
                frame_id: frame.id().to_string(),
                variant: variant.to_string(),
                iou_mode,
                scores: outcome.result.scores,
                boxes: box_reports(frame, outcome),
            };
            serde_json::to_string_pretty(&report).map(|s| s + "\n").map_err(|e| e.to_string())
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let rows = box_reports(frame, outcome);
            if rows.is_empty() {
                w.write_record(CSV_HEADER).map_err(|e| e.to_string())?;
            }
            for r in rows {
                w.serialize(r).map_err(|e| e.to_string())?;
            }
            let bytes = w.into_inner().map_err(|e| e.to_string())?;
            String::from_utf8(bytes).map_err(|e| e.to_string())
        }
    }
}

pub const CSV_HEADER: [&str; 19] = [
    "index", "type", "x", "y", "z", "h", "w", "l", "rotation_y", "score", "status", "output_score", "suppressed_by",
    "cluster_id", "density", "volume", "v_O", "category", "degenerate",
];

/// Writes `<frame_id>.<ext>` into `dir` for every frame, returning the paths.
pub fn write_results(
    dir: &Path,
    frames: &[KittiFrame],
    outcomes: &[FrameOutcome],
    variant: &str,
    iou_mode: IouMode,
    format: OutputFormat,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(frames.len());
    for (frame, outcome) in frames.iter().zip(outcomes) {
        let text = render(frame, outcome, variant, iou_mode, format).map_err(std::io::Error::other)?;
        let path = dir.join(format!("{}.{}", frame.id(), format.extension()));
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}
