//! Literal quadratic reference implementations of suppression and clustering.
//! The suppression loops keep a working list, repeatedly pull out the
//! best-scoring member and filter the rest, exactly as the textbook loop is
//! written. The clustering reference works from the full adjacency matrix.

#![allow(dead_code)]

use std::collections::BTreeSet;

use fuzzy_nms::clustering::NOISE;
use fuzzy_nms::fuzzy::Category;
use fuzzy_nms::geometry::{iou, Box3D, IouMode};
use fuzzy_nms::NmsConfig;

fn take_best(list: &mut Vec<usize>, scores: &[f64]) -> usize {
    let mut best = 0;
    for p in 1..list.len() {
        let (i, b) = (list[p], list[best]);
        if scores[i] > scores[b] || (scores[i] == scores[b] && i < b) {
            best = p;
        }
    }
    list.remove(best)
}

/// Indices kept, in selection order.
pub fn traditional(boxes: &[Box3D], t: f64, mode: IouMode) -> Vec<usize> {
    let scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
    let mut list: Vec<usize> = (0..boxes.len()).collect();
    let mut kept = Vec::new();
    while !list.is_empty() {
        let m = take_best(&mut list, &scores);
        kept.push(m);
        list.retain(|&j| {
            let o = iou(&boxes[m], &boxes[j], mode);
            !(o > 0.0 && o >= t)
        });
    }
    kept
}

pub fn diou_value(a: &Box3D, b: &Box3D, mode: IouMode) -> f64 {
    let ca = a.bev_corners();
    let cb = b.bev_corners();
    let all = ca.iter().chain(cb.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let mut c2 = (x1 - x0).powi(2) + (y1 - y0).powi(2);
    let mut rho2 = (a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2);
    if mode == IouMode::ThreeD {
        let top = (a.cz + a.dz / 2.0).max(b.cz + b.dz / 2.0);
        let bottom = (a.cz - a.dz / 2.0).min(b.cz - b.dz / 2.0);
        c2 += (top - bottom).powi(2);
        rho2 += (a.cz - b.cz).powi(2);
    }
    iou(a, b, mode) - rho2 / c2
}

pub fn diou(boxes: &[Box3D], t: f64, mode: IouMode) -> Vec<usize> {
    let scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
    let mut list: Vec<usize> = (0..boxes.len()).collect();
    let mut kept = Vec::new();
    while !list.is_empty() {
        let m = take_best(&mut list, &scores);
        kept.push(m);
        list.retain(|&j| !(iou(&boxes[m], &boxes[j], mode) > 0.0 && diou_value(&boxes[m], &boxes[j], mode) >= t));
    }
    kept
}

/// Gaussian Soft-NMS: `(index, final score)` in selection order.
pub fn soft(boxes: &[Box3D], sigma: f64, final_threshold: f64, mode: IouMode) -> Vec<(usize, f64)> {
    let mut scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
    let mut list: Vec<usize> = (0..boxes.len()).filter(|&i| scores[i] >= final_threshold).collect();
    let mut kept = Vec::new();
    while !list.is_empty() {
        let m = take_best(&mut list, &scores);
        kept.push((m, scores[m]));
        let mut rest = Vec::new();
        for &j in &list {
            let o = iou(&boxes[m], &boxes[j], mode);
            if o > 0.0 {
                scores[j] *= (-(o * o) / sigma).exp();
            }
            if scores[j] >= final_threshold {
                rest.push(j);
            }
        }
        list = rest;
    }
    kept
}

/// Per-category loop followed by the score filter. Only valid when the three
/// categories carry distinct threshold pairs, so that each forms its own group.
pub fn fuzzy(boxes: &[Box3D], categories: &[Category], config: &NmsConfig) -> Vec<usize> {
    let mut out = Vec::new();
    for c in Category::ALL {
        let members: Vec<usize> = (0..boxes.len()).filter(|&i| categories[i] == c).collect();
        let sub: Vec<Box3D> = members.iter().map(|&i| boxes[i]).collect();
        for k in traditional(&sub, config.iou_threshold.get(c), config.iou_mode) {
            if sub[k].score >= config.score_threshold.get(c) {
                out.push(members[k]);
            }
        }
    }
    out
}

/// Sorts indices into output order: score descending, ties by index.
pub fn in_score_order(mut idx: Vec<usize>, boxes: &[Box3D]) -> Vec<usize> {
    idx.sort_by(|&a, &b| boxes[b].score.total_cmp(&boxes[a].score).then(a.cmp(&b)));
    idx
}

pub fn within(a: &[f64; 3], b: &[f64; 3], eps: f64) -> bool {
    let d: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
    d <= eps * eps
}

/// Brute force: core points, connected components over core–core links,
/// clusters numbered by their smallest core index, border points joining the
/// lowest-numbered cluster among their core neighbors.
pub fn dbscan(points: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<u32> {
    let n = points.len();
    let adj: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| within(&points[i], &points[j], eps)).collect()).collect();
    let core: Vec<bool> = adj.iter().map(|row| row.iter().filter(|&&x| x).count() >= min_pts).collect();
    let mut comp = vec![usize::MAX; n];
    for i in 0..n {
        if !core[i] || comp[i] != usize::MAX {
            continue;
        }
        let mut stack = vec![i];
        comp[i] = i;
        while let Some(p) = stack.pop() {
            for q in 0..n {
                if core[q] && adj[p][q] && comp[q] == usize::MAX {
                    comp[q] = i;
                    stack.push(q);
                }
            }
        }
    }
    let roots: BTreeSet<usize> = comp.iter().copied().filter(|&c| c != usize::MAX).collect();
    let id_of = |root: usize| roots.iter().position(|&r| r == root).unwrap() as u32 + 1;
    (0..n)
        .map(|i| {
            if core[i] {
                id_of(comp[i])
            } else {
                (0..n).filter(|&j| core[j] && adj[i][j]).map(|j| id_of(comp[j])).min().unwrap_or(NOISE)
            }
        })
        .collect()
}
