//! Density-based clustering over a uniform radius grid.
//!
//! Core points are found in parallel (pure per-point counts). Expansion is
//! sequential: seeds are taken in ascending point index, each cluster grows
//! breadth-first, and a border point joins the first cluster that reaches
//! it. The result therefore only depends on the input order.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::par;
use crate::spatial::RadiusGrid;

use super::LabelError;

/// Cluster id of noise points.
pub const NOISE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanParams {
    /// Neighbourhood radius, meters (inclusive).
    pub eps: f64,
    /// Neighbours, the point itself included, needed for a core point.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 0.6,
            min_pts: 100,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<(), LabelError> {
        if !(self.eps.is_finite() && self.eps > 0.0) || self.min_pts == 0 {
            return Err(LabelError::Param(format!("invalid DBSCAN parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster id per point, [`NOISE`] for noise.
    pub labels: Vec<u32>,
    pub is_core: Vec<bool>,
    pub n_clusters: usize,
}

impl Clustering {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

pub fn dbscan(points: &[Point3], params: &DbscanParams) -> Result<Clustering, LabelError> {
    params.validate()?;
    if points.is_empty() {
        return Ok(Clustering {
            labels: Vec::new(),
            is_core: Vec::new(),
            n_clusters: 0,
        });
    }
    let grid = RadiusGrid::new(points, params.eps);
    let is_core = par::map_range(points.len(), |i| {
        grid.count_within(points[i], params.min_pts) >= params.min_pts
    });

    let mut labels = vec![NOISE; points.len()];
    let mut n_clusters = 0u32;
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if !is_core[seed] || labels[seed] != NOISE {
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        labels[seed] = id;
        queue.push_back(seed);
        while let Some(q) = queue.pop_front() {
            grid.for_each_within(points[q], |j| {
                if labels[j] == NOISE {
                    labels[j] = id;
                    if is_core[j] {
                        queue.push_back(j);
                    }
                }
                true
            });
        }
    }
    Ok(Clustering {
        labels,
        is_core,
        n_clusters: n_clusters as usize,
    })
}
