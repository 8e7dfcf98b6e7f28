//! Suppression algorithms: category-aware fuzzy NMS and the greedy, Soft and
//! DIoU baselines it is compared against.
//!
//! Every variant orders candidates by score (descending, ties by lower input
//! index) and treats a pair with zero overlap as never suppressing, so a
//! threshold of 0.0 suppresses exactly the overlapping pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::Category;
use crate::geometry::{Box3D, Frame, IouMode, PreparedBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NmsError {
    #[error("{boxes} boxes but {categories} category labels")]
    CategoryMismatch { boxes: usize, categories: usize },
    #[error("{boxes} boxes but {scores} scores")]
    ScoreMismatch { boxes: usize, scores: usize },
    #[error("soft-nms sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("threshold {name} must lie in [0, 1], got {value}")]
    ThresholdOutOfRange { name: String, value: f64 },
}

/// One value per fuzzy category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryThresholds {
    #[serde(rename = "LD")]
    pub ld: f64,
    #[serde(rename = "LVHD")]
    pub lvhd: f64,
    #[serde(rename = "SVHD")]
    pub svhd: f64,
}

impl CategoryThresholds {
    pub const fn uniform(v: f64) -> Self {
        Self { ld: v, lvhd: v, svhd: v }
    }

    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Ld => self.ld,
            Category::Svhd => self.svhd,
            Category::Lvhd => self.lvhd,
        }
    }

    pub fn set(&mut self, c: Category, v: f64) {
        match c {
            Category::Ld => self.ld = v,
            Category::Svhd => self.svhd = v,
            Category::Lvhd => self.lvhd = v,
        }
    }

    fn validate(&self, what: &str) -> Result<(), NmsError> {
        for c in Category::ALL {
            let value = self.get(c);
            if !(0.0..=1.0).contains(&value) {
                return Err(NmsError::ThresholdOutOfRange { name: format!("{what}.{c}"), value });
            }
        }
        Ok(())
    }
}

/// Per-category thresholds and engine options for fuzzy NMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub iou_threshold: CategoryThresholds,
    pub score_threshold: CategoryThresholds,
    pub iou_mode: IouMode,
    /// Global confidence cutoff applied before clustering; disabled when `None`.
    pub pre_filter_score: Option<f64>,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: CategoryThresholds { ld: 0.01, lvhd: 0.6, svhd: 0.0 },
            score_threshold: CategoryThresholds { ld: 0.1, lvhd: 0.1, svhd: 0.3 },
            iou_mode: IouMode::Bev,
            pre_filter_score: None,
        }
    }
}

impl NmsConfig {
    /// Same thresholds for every category.
    pub fn unified(iou: f64, score: f64, iou_mode: IouMode) -> Self {
        Self {
            iou_threshold: CategoryThresholds::uniform(iou),
            score_threshold: CategoryThresholds::uniform(score),
            iou_mode,
            pre_filter_score: None,
        }
    }

    pub fn validate(&self) -> Result<(), NmsError> {
        self.iou_threshold.validate("iou_threshold")?;
        self.score_threshold.validate("score_threshold")?;
        if let Some(value) = self.pre_filter_score {
            if !(0.0..=1.0).contains(&value) {
                return Err(NmsError::ThresholdOutOfRange { name: "pre_filter_score".into(), value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kept {
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suppressed {
    pub index: usize,
    /// Index of the selected box that removed this one.
    pub by: usize,
}

/// Whether kept scores are the detector's or were rescored by the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreProvenance {
    #[default]
    Original,
    Decayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub kept: usize,
    pub suppressed: usize,
    pub filtered: usize,
}

/// Kept, suppressed and score-filtered indices partition the input.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NmsResult {
    /// Non-increasing score order, ties by lower index.
    pub kept: Vec<Kept>,
    pub suppressed: Vec<Suppressed>,
    /// Removed by a score threshold rather than by overlap.
    pub filtered: Vec<usize>,
    pub category_counts: BTreeMap<Category, CategoryCounts>,
    pub scores: ScoreProvenance,
}

impl NmsResult {
    pub fn kept_indices(&self) -> Vec<usize> {
        self.kept.iter().map(|k| k.index).collect()
    }

    pub fn len_total(&self) -> usize {
        self.kept.len() + self.suppressed.len() + self.filtered.len()
    }

    fn finish(mut self) -> Self {
        self.kept.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        self.suppressed.sort_by_key(|s| s.index);
        self.filtered.sort_unstable();
        self
    }
}

/// Indices sorted by descending score, ties by ascending index.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn check_scores(boxes: &[Box3D], scores: &[f64]) {
    assert_eq!(boxes.len(), scores.len(), "boxes and scores must be aligned");
}

/// Greedy selection over `order`; `suppresses(m, j)` decides whether selected
/// box `m` removes candidate `j`.
fn greedy<F>(order: &[usize], mut suppresses: F) -> (Vec<usize>, Vec<Suppressed>)
where
    F: FnMut(usize, usize) -> bool,
{
    let mut removed = vec![false; order.len()];
    let mut kept = Vec::new();
    let mut suppressed = Vec::new();
    for (pos, &m) in order.iter().enumerate() {
        if removed[pos] {
            continue;
        }
        kept.push(m);
        for (off, &j) in order[pos + 1..].iter().enumerate() {
            let slot = pos + 1 + off;
            if !removed[slot] && suppresses(m, j) {
                removed[slot] = true;
                suppressed.push(Suppressed { index: j, by: m });
            }
        }
    }
    (kept, suppressed)
}

fn overlap_suppresses(iou: f64, threshold: f64) -> bool {
    iou > 0.0 && iou >= threshold
}

/// Classic greedy NMS with a single IoU threshold.
pub fn traditional_nms(boxes: &[Box3D], scores: &[f64], iou_thresh: f64, iou_mode: IouMode) -> NmsResult {
    check_scores(boxes, scores);
    let prepared: Vec<PreparedBox> = boxes.iter().copied().map(PreparedBox::new).collect();
    let order = score_order(scores);
    let (kept, suppressed) = greedy(&order, |m, j| {
        overlap_suppresses(prepared[m].iou(&prepared[j], iou_mode), iou_thresh)
    });
    NmsResult {
        kept: kept.into_iter().map(|index| Kept { index, score: scores[index] }).collect(),
        suppressed,
        ..Default::default()
    }
    .finish()
}

/// IoU minus the squared center distance over the squared diagonal of the
/// smallest axis-aligned region enclosing both boxes.
pub fn diou(a: &PreparedBox, b: &PreparedBox, mode: IouMode) -> f64 {
    let iou = a.iou(b, mode);
    let (alo, ahi) = a.bev_bounds();
    let (blo, bhi) = b.bev_bounds();
    let w = ahi.x.max(bhi.x) - alo.x.min(blo.x);
    let h = ahi.y.max(bhi.y) - alo.y.min(blo.y);
    let dx = a.bx.cx - b.bx.cx;
    let dy = a.bx.cy - b.bx.cy;
    let mut diag2 = w * w + h * h;
    let mut rho2 = dx * dx + dy * dy;
    if mode == IouMode::ThreeD {
        let (az0, az1) = a.bx.z_range();
        let (bz0, bz1) = b.bx.z_range();
        let d = az1.max(bz1) - az0.min(bz0);
        let dz = a.bx.cz - b.bx.cz;
        diag2 += d * d;
        rho2 += dz * dz;
    }
    if diag2 <= 0.0 {
        return iou;
    }
    iou - rho2 / diag2
}

/// Greedy NMS suppressing on DIoU instead of IoU.
pub fn diou_nms(boxes: &[Box3D], scores: &[f64], iou_thresh: f64, iou_mode: IouMode) -> NmsResult {
    check_scores(boxes, scores);
    let prepared: Vec<PreparedBox> = boxes.iter().copied().map(PreparedBox::new).collect();
    let order = score_order(scores);
    let (kept, suppressed) = greedy(&order, |m, j| {
        let a = &prepared[m];
        let b = &prepared[j];
        a.iou(b, iou_mode) > 0.0 && diou(a, b, iou_mode) >= iou_thresh
    });
    NmsResult {
        kept: kept.into_iter().map(|index| Kept { index, score: scores[index] }).collect(),
        suppressed,
        ..Default::default()
    }
    .finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SoftPenalty {
    /// `score · exp(−IoU² / σ)`.
    Gaussian { sigma: f64 },
    /// `score · (1 − IoU)` once IoU reaches the threshold.
    Linear { iou_threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftNmsParams {
    pub penalty: SoftPenalty,
    /// Boxes whose decayed score falls below this are dropped.
    pub final_threshold: f64,
    pub iou_mode: IouMode,
}

impl Default for SoftNmsParams {
    fn default() -> Self {
        Self { penalty: SoftPenalty::Gaussian { sigma: 0.5 }, final_threshold: 0.001, iou_mode: IouMode::Bev }
    }
}

impl SoftNmsParams {
    pub fn validate(&self) -> Result<(), NmsError> {
        match self.penalty {
            SoftPenalty::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(NmsError::InvalidSigma(sigma)),
            SoftPenalty::Linear { iou_threshold } if !(0.0..=1.0).contains(&iou_threshold) => {
                Err(NmsError::ThresholdOutOfRange { name: "soft.iou_threshold".into(), value: iou_threshold })
            }
            _ if !(0.0..=1.0).contains(&self.final_threshold) => Err(NmsError::ThresholdOutOfRange {
                name: "soft.final_threshold".into(),
                value: self.final_threshold,
            }),
            _ => Ok(()),
        }
    }

    fn decay(&self, iou: f64) -> f64 {
        match self.penalty {
            SoftPenalty::Gaussian { sigma } => (-(iou * iou) / sigma).exp(),
            SoftPenalty::Linear { iou_threshold } => {
                if iou > 0.0 && iou >= iou_threshold {
                    1.0 - iou
                } else {
                    1.0
                }
            }
        }
    }
}

/// Soft-NMS: overlapping candidates are rescored instead of removed. Kept
/// scores are the decayed ones.
pub fn soft_nms(boxes: &[Box3D], scores: &[f64], params: &SoftNmsParams) -> Result<NmsResult, NmsError> {
    params.validate()?;
    if boxes.len() != scores.len() {
        return Err(NmsError::ScoreMismatch { boxes: boxes.len(), scores: scores.len() });
    }
    let prepared: Vec<PreparedBox> = boxes.iter().copied().map(PreparedBox::new).collect();
    let mut current = scores.to_vec();
    let mut active: Vec<usize> = Vec::with_capacity(boxes.len());
    let mut result = NmsResult { scores: ScoreProvenance::Decayed, ..Default::default() };
    for (i, &s) in current.iter().enumerate() {
        if s < params.final_threshold {
            result.filtered.push(i);
        } else {
            active.push(i);
        }
    }
    while !active.is_empty() {
        let mut best = 0;
        for (pos, &i) in active.iter().enumerate().skip(1) {
            let b = active[best];
            if current[i] > current[b] || (current[i] == current[b] && i < b) {
                best = pos;
            }
        }
        let m = active.swap_remove(best);
        result.kept.push(Kept { index: m, score: current[m] });
        active.retain(|&j| {
            let iou = prepared[m].iou(&prepared[j], params.iou_mode);
            if iou > 0.0 {
                current[j] *= params.decay(iou);
            }
            if current[j] < params.final_threshold {
                result.suppressed.push(Suppressed { index: j, by: m });
                false
            } else {
                true
            }
        });
    }
    Ok(result.finish())
}

/// Category-aware greedy suppression.
///
/// Boxes are grouped by the (IoU, score) threshold pair of their category;
/// each group runs its own greedy loop, so boxes in different groups never
/// suppress each other. Survivors below their group's score threshold are
/// then filtered. With distinct per-category thresholds the groups are the
/// categories themselves.
pub fn fuzzy_nms(frame: &Frame, categories: &[Category], config: &NmsConfig) -> Result<NmsResult, NmsError> {
    fuzzy_nms_boxes(&frame.boxes, categories, config)
}

pub fn fuzzy_nms_boxes(boxes: &[Box3D], categories: &[Category], config: &NmsConfig) -> Result<NmsResult, NmsError> {
    if boxes.len() != categories.len() {
        return Err(NmsError::CategoryMismatch { boxes: boxes.len(), categories: categories.len() });
    }
    config.validate()?;
    let scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
    let prepared: Vec<PreparedBox> = boxes.iter().copied().map(PreparedBox::new).collect();
    let order = score_order(&scores);

    let key = |c: Category| (config.iou_threshold.get(c).to_bits(), config.score_threshold.get(c).to_bits());
    let mut groups: Vec<(u64, u64)> = Vec::new();
    for c in Category::ALL {
        if !groups.contains(&key(c)) {
            groups.push(key(c));
        }
    }

    let mut result = NmsResult::default();
    for c in Category::ALL {
        result.category_counts.insert(c, CategoryCounts::default());
    }
    for group in groups {
        let iou_t = f64::from_bits(group.0);
        let score_t = f64::from_bits(group.1);
        let members: Vec<usize> = order.iter().copied().filter(|&i| key(categories[i]) == group).collect();
        let (kept, suppressed) = greedy(&members, |m, j| {
            overlap_suppresses(prepared[m].iou(&prepared[j], config.iou_mode), iou_t)
        });
        for s in &suppressed {
            result.category_counts.get_mut(&categories[s.index]).expect("all categories").suppressed += 1;
        }
        result.suppressed.extend(suppressed);
        for index in kept {
            let counts = result.category_counts.get_mut(&categories[index]).expect("all categories");
            if scores[index] < score_t {
                counts.filtered += 1;
                result.filtered.push(index);
            } else {
                counts.kept += 1;
                result.kept.push(Kept { index, score: scores[index] });
            }
        }
    }
    Ok(result.finish())
}

/// Runs `nms` separately for every detector label and merges the results.
pub fn per_label<F>(boxes: &[Box3D], scores: &[f64], mut nms: F) -> NmsResult
where
    F: FnMut(&[Box3D], &[f64]) -> NmsResult,
{
    check_scores(boxes, scores);
    let mut labels: Vec<u32> = boxes.iter().map(|b| b.label).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut merged = NmsResult::default();
    for label in labels {
        let idx: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].label == label).collect();
        let sub_boxes: Vec<Box3D> = idx.iter().map(|&i| boxes[i]).collect();
        let sub_scores: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let r = nms(&sub_boxes, &sub_scores);
        merged.scores = r.scores;
        merged.kept.extend(r.kept.iter().map(|k| Kept { index: idx[k.index], score: k.score }));
        merged.suppressed.extend(r.suppressed.iter().map(|s| Suppressed { index: idx[s.index], by: idx[s.by] }));
        merged.filtered.extend(r.filtered.iter().map(|&f| idx[f]));
    }
    merged.finish()
}
