//! KITTI-style average precision for comparing suppression variants on
//! labeled frames.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Box3D, IouMode, PreparedBox};
use crate::kitti::{KittiFrame, KittiRecord};

/// Recall positions at which interpolated precision is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RecallPoints {
    /// `{0, 0.1, …, 1.0}`.
    #[serde(rename = "R11")]
    R11,
    /// `{1/40, 2/40, …, 1}`.
    #[default]
    #[serde(rename = "R40")]
    R40,
}

impl RecallPoints {
    /// `(first k, last k, denominator)`: position `k` is recall `k / denominator`.
    fn positions(self) -> (u64, u64, u64) {
        match self {
            RecallPoints::R11 => (0, 10, 10),
            RecallPoints::R40 => (1, 40, 40),
        }
    }

    pub fn values(self) -> Vec<f64> {
        let (lo, hi, den) = self.positions();
        (lo..=hi).map(|k| k as f64 / den as f64).collect()
    }
}

impl std::str::FromStr for RecallPoints {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "R11" | "11" => Ok(RecallPoints::R11),
            "R40" | "40" => Ok(RecallPoints::R40),
            other => Err(format!("unknown recall sampling '{other}' (expected R11 or R40)")),
        }
    }
}

/// Ground-truth visibility gate for one difficulty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Difficulty {
    pub name: String,
    /// Minimum 2D box height in pixels.
    pub min_height: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

impl Difficulty {
    fn admits(&self, r: &KittiRecord) -> bool {
        r.bbox_height() >= self.min_height && r.occluded <= self.max_occlusion && r.truncated <= self.max_truncation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    /// KITTI type string, e.g. `Car`.
    pub name: String,
    pub iou_threshold: f64,
    /// Neighboring types whose ground truth neither counts nor penalizes.
    pub ignore: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub classes: Vec<ClassSpec>,
    pub difficulties: Vec<Difficulty>,
    pub recall: RecallPoints,
}

impl Default for EvalSpec {
    fn default() -> Self {
        let class = |name: &str, iou_threshold: f64, ignore: &[&str]| ClassSpec {
            name: name.into(),
            iou_threshold,
            ignore: ignore.iter().map(|s| s.to_string()).collect(),
        };
        let diff = |name: &str, min_height: f64, max_occlusion: i32, max_truncation: f64| Difficulty {
            name: name.into(),
            min_height,
            max_occlusion,
            max_truncation,
        };
        Self {
            classes: vec![
                class("Car", 0.7, &["Van"]),
                class("Pedestrian", 0.5, &["Person_sitting"]),
                class("Cyclist", 0.5, &[]),
            ],
            difficulties: vec![diff("easy", 40.0, 0, 0.15), diff("moderate", 25.0, 1, 0.3), diff("hard", 25.0, 2, 0.5)],
            recall: RecallPoints::R40,
        }
    }
}

impl EvalSpec {
    pub fn validate(&self) -> Result<(), String> {
        for c in &self.classes {
            if !(c.iou_threshold > 0.0 && c.iou_threshold <= 1.0) {
                return Err(format!("class {}: IoU threshold {} outside (0, 1]", c.name, c.iou_threshold));
            }
        }
        Ok(())
    }

    /// `car_easy, car_moderate, …` in class-major order.
    pub fn ap_columns(&self) -> Vec<String> {
        self.classes
            .iter()
            .flat_map(|c| self.difficulties.iter().map(move |d| format!("{}_{}", c.name.to_lowercase(), d.name)))
            .collect()
    }
}

/// Outcome for one detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Match {
    Tp,
    Fp,
    /// Matched an ignored ground truth or fell inside a DontCare region.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalGt {
    pub bx: Box3D,
    pub ignore: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalDet {
    pub bx: Box3D,
    pub score: f64,
    pub bbox_2d: Option<[f64; 4]>,
}

/// Single-frame, single-class matching without ignore regions.
pub fn match_detections(dets: &[Box3D], gts: &[Box3D], iou_thresh: f64, iou_mode: IouMode) -> Vec<Match> {
    let dets: Vec<EvalDet> = dets.iter().map(|&bx| EvalDet { bx, score: bx.score, bbox_2d: None }).collect();
    let gts: Vec<EvalGt> = gts.iter().map(|&bx| EvalGt { bx, ignore: false }).collect();
    match_frame(&dets, &gts, &[], iou_thresh, iou_mode)
}

/// Greedy matching in descending score order (ties by lower index). Each
/// ground truth absorbs at most one detection. A detection is a true positive
/// when the best unmatched counted ground truth reaches `iou_thresh`; failing
/// that it is ignored if it reaches an unmatched ignored ground truth or lies
/// mostly inside a DontCare region, and a false positive otherwise.
pub fn match_frame(
    dets: &[EvalDet],
    gts: &[EvalGt],
    dont_care: &[[f64; 4]],
    iou_thresh: f64,
    iou_mode: IouMode,
) -> Vec<Match> {
    let gt_prep: Vec<PreparedBox> = gts.iter().map(|g| PreparedBox::new(g.bx)).collect();
    let mut taken = vec![false; gts.len()];
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut out = vec![Match::Fp; dets.len()];
    for i in order {
        let d = PreparedBox::new(dets[i].bx);
        let mut best: [Option<(usize, f64)>; 2] = [None, None];
        for (j, g) in gts.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let iou = d.iou(&gt_prep[j], iou_mode);
            if iou <= 0.0 || iou < iou_thresh {
                continue;
            }
            let slot = &mut best[g.ignore as usize];
            if slot.is_none_or(|(_, b)| iou > b) {
                *slot = Some((j, iou));
            }
        }
        out[i] = if let Some((j, _)) = best[0] {
            taken[j] = true;
            Match::Tp
        } else if let Some((j, _)) = best[1] {
            taken[j] = true;
            Match::Ignored
        } else if dets[i].bbox_2d.is_some_and(|b| dont_care.iter().any(|dc| covered_by(&b, dc))) {
            Match::Ignored
        } else {
            Match::Fp
        };
    }
    out
}

/// More than half of `det`'s 2D area lies inside `region`.
fn covered_by(det: &[f64; 4], region: &[f64; 4]) -> bool {
    let area = (det[2] - det[0]) * (det[3] - det[1]);
    if area <= 0.0 {
        return false;
    }
    let w = det[2].min(region[2]) - det[0].max(region[0]);
    let h = det[3].min(region[3]) - det[1].max(region[1]);
    w > 0.0 && h > 0.0 && w * h / area > 0.5
}

/// Interpolated average precision from `(score, is_tp)` pairs pooled across
/// frames. Detections with equal scores enter the curve together. Returns 1
/// when there is nothing to find and nothing was reported.
pub fn average_precision(scored: &[(f64, bool)], num_gt: usize, recall: RecallPoints) -> f64 {
    if num_gt == 0 {
        return if scored.is_empty() { 1.0 } else { 0.0 };
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    // (tp, total) at the end of every equal-score run.
    let mut points: Vec<(u64, u64)> = Vec::new();
    let (mut tp, mut n) = (0u64, 0u64);
    for (i, &(score, hit)) in sorted.iter().enumerate() {
        tp += hit as u64;
        n += 1;
        if sorted.get(i + 1).is_none_or(|next| next.0 != score) {
            points.push((tp, n));
        }
    }
    // Best precision at or beyond each point, scanning from the tail.
    let mut best_after = vec![0.0f64; points.len()];
    let mut running = 0.0f64;
    for (slot, &(tp, n)) in best_after.iter_mut().zip(&points).rev() {
        running = running.max(tp as f64 / n as f64);
        *slot = running;
    }
    let (lo, hi, den) = recall.positions();
    let gt = num_gt as u64;
    let mut sum = 0.0;
    let mut first = 0;
    for k in lo..=hi {
        while first < points.len() && points[first].0 * den < k * gt {
            first += 1;
        }
        if first < points.len() {
            sum += best_after[first];
        }
    }
    sum / (hi - lo + 1) as f64
}

/// Pooled detections and counted ground truth for one class and difficulty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    pub scored: Vec<(f64, bool)>,
    pub num_gt: usize,
}

impl Accumulator {
    pub fn ap(&self, recall: RecallPoints) -> f64 {
        average_precision(&self.scored, self.num_gt, recall)
    }

    pub fn true_positives(&self) -> usize {
        self.scored.iter().filter(|s| s.1).count()
    }
}

/// Adds one frame's surviving detections (`(index, score)` into
/// `frame.frame.boxes`) to the accumulator for `class` / `difficulty`.
pub fn accumulate_frame(
    acc: &mut Accumulator,
    frame: &KittiFrame,
    kept: &[(usize, f64)],
    class: &ClassSpec,
    difficulty: &Difficulty,
    iou_mode: IouMode,
) {
    let mut gts = Vec::new();
    if let Some(boxes) = &frame.frame.ground_truth {
        for (rec, &bx) in frame.labels.iter().zip(boxes) {
            if rec.kind == class.name {
                let ignore = !difficulty.admits(rec);
                acc.num_gt += !ignore as usize;
                gts.push(EvalGt { bx, ignore });
            } else if class.ignore.contains(&rec.kind) {
                gts.push(EvalGt { bx, ignore: true });
            }
        }
    }
    let dets: Vec<EvalDet> = kept
        .iter()
        .filter(|&&(i, _)| frame.detections[i].kind == class.name)
        .map(|&(i, score)| EvalDet { bx: frame.frame.boxes[i], score, bbox_2d: Some(frame.detections[i].bbox_2d) })
        .collect();
    let flags = match_frame(&dets, &gts, &frame.dont_care, class.iou_threshold, iou_mode);
    for (d, m) in dets.iter().zip(flags) {
        match m {
            Match::Tp => acc.scored.push((d.score, true)),
            Match::Fp => acc.scored.push((d.score, false)),
            Match::Ignored => {}
        }
    }
}

/// AP per class and difficulty, plus pooled recall over every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApTable {
    /// Keyed by column name (`car_easy`, …), values in `[0, 1]`.
    pub ap: BTreeMap<String, f64>,
    /// True positives over counted ground truth at the middle difficulty
    /// level, pooled across classes.
    pub recall: f64,
}

/// Evaluates one set of surviving detections per frame.
pub fn evaluate(frames: &[KittiFrame], kept: &[Vec<(usize, f64)>], spec: &EvalSpec, iou_mode: IouMode) -> ApTable {
    let mut ap = BTreeMap::new();
    let recall_level = spec.difficulties.len() / 2;
    let (mut tp, mut gt) = (0usize, 0usize);
    for class in &spec.classes {
        for (level, diff) in spec.difficulties.iter().enumerate() {
            let mut acc = Accumulator::default();
            for (frame, k) in frames.iter().zip(kept) {
                accumulate_frame(&mut acc, frame, k, class, diff, iou_mode);
            }
            if level == recall_level {
                tp += acc.true_positives();
                gt += acc.num_gt;
            }
            ap.insert(format!("{}_{}", class.name.to_lowercase(), diff.name), acc.ap(spec.recall));
        }
    }
    let recall = if gt == 0 { 0.0 } else { tp as f64 / gt as f64 };
    ApTable { ap, recall }
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    /// `3d` or `bev`.
    pub metric: String,
    pub table: ApTable,
    pub kept: usize,
    pub suppressed: usize,
    pub filtered: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["method".to_string(), "metric".to_string()];
        h.extend(self.columns.iter().cloned());
        h.extend(["recall", "kept", "suppressed", "filtered", "mean_ms", "p95_ms"].map(String::from));
        h
    }

    /// AP as percentages with two decimals, latency in milliseconds.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.method.clone(), r.metric.clone()];
            rec.extend(self.columns.iter().map(|c| format!("{:.2}", 100.0 * r.table.ap.get(c).copied().unwrap_or(0.0))));
            rec.push(format!("{:.4}", r.table.recall));
            rec.extend([r.kept, r.suppressed, r.filtered].map(|v| v.to_string()));
            rec.push(format!("{:.2}", r.mean_ms));
            rec.push(format!("{:.2}", r.p95_ms));
            w.write_record(rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Mean and 95th percentile (nearest rank) of a latency sample.
pub fn latency_stats(ms: &[f64]) -> (f64, f64) {
    if ms.is_empty() {
        return (0.0, 0.0);
    }
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    let mut sorted = ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    (mean, sorted[rank - 1])
}
