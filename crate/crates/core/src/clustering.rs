//! DBSCAN over box centers and the per-cluster normalized density.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Frame;

/// Cluster id reserved for noise points.
pub const NOISE: u32 = 0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusteringError {
    #[error("eps must be positive and finite, got {0}")]
    InvalidEps(f64),
    #[error("min_pts must be at least 1")]
    InvalidMinPts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    /// Neighborhood radius in meters.
    pub eps: f64,
    /// Neighbors (self included) required for a core point.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self { eps: 0.3, min_pts: 4 }
    }
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self, ClusteringError> {
        let p = Self { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ClusteringError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ClusteringError::InvalidEps(self.eps));
        }
        if self.min_pts == 0 {
            return Err(ClusteringError::InvalidMinPts);
        }
        Ok(())
    }
}

/// Per-box cluster membership and density.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// `0` marks noise, `1..=K` the clusters in discovery order.
    pub cluster_ids: Vec<u32>,
    pub density: Vec<f64>,
}

impl ClusterAssignment {
    pub fn len(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_ids.is_empty()
    }

    pub fn num_clusters(&self) -> u32 {
        self.cluster_ids.iter().copied().max().unwrap_or(NOISE)
    }
}

/// Uniform hash grid with cell size `eps`; a radius query only visits the 27
/// cells around the query point.
struct NeighborGrid<'a> {
    points: &'a [[f64; 3]],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> NeighborGrid<'a> {
    fn new(points: &'a [[f64; 3]], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    fn key(p: &[f64; 3], cell: f64) -> [i64; 3] {
        p.map(|v| (v / cell).floor() as i64)
    }

    /// Indices within `radius` of point `i` (itself included), ascending.
    fn within(&self, i: usize, radius: f64) -> Vec<usize> {
        let p = self.points[i];
        let k = Self::key(&p, self.cell);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    out.extend(bucket.iter().copied().filter(|&j| dist2(&p, &self.points[j]) <= r2));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Density-based clustering of 3D points.
///
/// Seeds are taken in input order and each cluster is expanded breadth-first,
/// visiting neighbors in ascending index order, so a border point reachable
/// from several clusters joins the one discovered first.
pub fn dbscan(points: &[[f64; 3]], params: &DbscanParams) -> Vec<u32> {
    const UNSET: u32 = u32::MAX;
    if points.is_empty() {
        return Vec::new();
    }
    let grid = NeighborGrid::new(points, params.eps);
    let neighbors: Vec<Vec<usize>> = (0..points.len()).map(|i| grid.within(i, params.eps)).collect();
    let is_core: Vec<bool> = neighbors.iter().map(|n| n.len() >= params.min_pts).collect();

    let mut labels = vec![UNSET; points.len()];
    let mut next_id = 1u32;
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if labels[seed] != UNSET || !is_core[seed] {
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[seed] = id;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q] == UNSET {
                    labels[q] = id;
                    if is_core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    for l in labels.iter_mut() {
        if *l == UNSET {
            *l = NOISE;
        }
    }
    labels
}

/// Member count per cluster id, noise at index 0.
pub fn cluster_counts(ids: &[u32]) -> Vec<usize> {
    let k = ids.iter().copied().max().unwrap_or(NOISE) as usize;
    let mut counts = vec![0usize; k + 1];
    for &id in ids {
        counts[id as usize] += 1;
    }
    counts
}

/// `D_k = N_k / max(N_0, N_1, …, N_K)`, broadcast to every member of cluster `k`.
/// Noise is treated as cluster 0 like any other.
pub fn cluster_density(ids: &[u32]) -> Vec<f64> {
    if ids.is_empty() {
        return Vec::new();
    }
    let counts = cluster_counts(ids);
    let max = counts.iter().copied().max().unwrap_or(1) as f64;
    ids.iter().map(|&id| counts[id as usize] as f64 / max).collect()
}

/// Clusters the frame's box centers and derives per-box densities.
pub fn estimate(frame: &Frame, params: &DbscanParams) -> ClusterAssignment {
    let centers: Vec<[f64; 3]> = frame.boxes.iter().map(|b| b.center()).collect();
    estimate_points(&centers, params)
}

pub fn estimate_points(centers: &[[f64; 3]], params: &DbscanParams) -> ClusterAssignment {
    let cluster_ids = dbscan(centers, params);
    let density = cluster_density(&cluster_ids);
    ClusterAssignment { cluster_ids, density }
}
