// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Per-vertex star and clique counts and the processes built from them.
//!
//! * `D_k(p)` counts ordered `(k-1)`-tuples of distinct neighbors of `p`, which
//!   is the falling factorial `deg (deg - 1) ... (deg - k + 2)`.
//! * `C_m(p)` counts `m`-cliques in which `p` has the largest depth (is closest
//!   to the origin). Depth ties are broken by vertex index, so the per-vertex
//!   clique counts partition the set of all `m`-cliques.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_from_radii, half_angle_sin_sq, ModelParams, PolarPoint};
use crate::graph::{HGraph, Orientation, BOUNDARY_BAND};
use crate::sampler::{sample_cloud_with, RadialLaw};

/// `n (n-1) ... (n-r+1)`, zero when `r > n`.
pub fn falling_factorial(n: u64, r: usize) -> Result<u128> {
    let mut acc: u128 = 1;
    for i in 0..r as u64 {
        if i >= n {
            return Ok(0);
        }
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Overflow(format!("{n} falling {r}")))?;
    }
    Ok(acc)
}

/// `D_k` at `vertex`.
pub fn star_count(graph: &HGraph, vertex: usize, k: usize) -> Result<u128> {
    if k < 2 {
        return Err(Error::invalid(format!("star order must be at least 2, got {k}")));
    }
    falling_factorial(graph.degree(vertex) as u64, k - 1)
}

/// `C_m` at `vertex`: `(m-1)`-subsets of its in-neighbors that are pairwise adjacent.
pub fn clique_count(orientation: &Orientation, vertex: usize, m: usize) -> Result<u64> {
    if m < 3 {
        return Err(Error::invalid(format!("clique order must be at least 3, got {m}")));
    }
    Ok(extend_cliques(orientation.in_neighbors(vertex), m - 1, &|w| orientation.in_neighbors(w)))
}

/// Number of `k`-cliques inside `cands`, where `lower(w)` lists the neighbors of
/// `w` that precede it in a fixed total order. All lists are sorted.
fn extend_cliques<'a, F>(cands: &[u32], k: usize, lower: &F) -> u64
where
    F: Fn(usize) -> &'a [u32],
{
    match k {
        0 => 1,
        1 => cands.len() as u64,
        _ => {
            let mut next = Vec::new();
            let mut total = 0;
            for &w in cands {
                intersect_into(cands, lower(w as usize), &mut next);
                if next.len() + 1 >= k {
                    total += extend_cliques(&next, k - 1, lower);
                }
            }
            total
        }
    }
}

fn intersect_into(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Per-vertex degree, star and clique counts in cloud order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFunctionals {
    pub degree: Vec<u64>,
    pub star: BTreeMap<usize, Vec<u128>>,
    pub clique: BTreeMap<usize, Vec<u64>>,
}

impl VertexFunctionals {
    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }
}

/// Computes `D_k` for every `k` in `ks` and `C_m` for every `m` in `ms`.
pub fn compute_functionals(graph: &HGraph, ks: &[usize], ms: &[usize]) -> Result<VertexFunctionals> {
    let n = graph.len();
    let degree: Vec<u64> = (0..n).map(|v| graph.degree(v) as u64).collect();
    let mut star = BTreeMap::new();
    for &k in ks {
        let counts = (0..n).map(|v| star_count(graph, v, k)).collect::<Result<Vec<_>>>()?;
        star.insert(k, counts);
    }
    let mut clique = BTreeMap::new();
    if !ms.is_empty() {
        let orientation = graph.depth_order();
        for &m in ms {
            let counts = (0..n)
                .into_par_iter()
                .map(|v| clique_count(&orientation, v, m))
                .collect::<Result<Vec<_>>>()?;
            clique.insert(m, counts);
        }
    }
    Ok(VertexFunctionals { degree, star, clique })
}

/// `CC = 3 Σ C_3 / Σ D_3`, or `None` when the graph has no wedges.
pub fn clustering_coefficient(graph: &HGraph) -> Option<f64> {
    let orientation = graph.depth_order();
    let triangles: u64 = (0..graph.len())
        .into_par_iter()
        .map(|v| clique_count(&orientation, v, 3).expect("m = 3 is valid"))
        .sum();
    let wedges: u128 = (0..graph.len())
        .map(|v| {
            let d = graph.degree(v) as u128;
            d * d.saturating_sub(1)
        })
        .sum();
    clustering_from_totals(triangles as u128, wedges)
}

/// Clustering coefficient from `Σ C_3` and `Σ D_3`.
pub fn clustering_from_totals(sum_c3: u128, sum_d3: u128) -> Option<f64> {
    (sum_d3 > 0).then(|| 3.0 * sum_c3 as f64 / sum_d3 as f64)
}

/// A step-function path sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Deterministic centering subtracted from partial sums.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering {
    None,
    /// `centering(j) = j * mean` for the first `j` summands.
    Linear(f64),
    /// `centering(j)` given explicitly for `j = 0..=N`.
    PerIndex(Vec<f64>),
}

impl Centering {
    fn at(&self, j: usize) -> Result<f64> {
        match self {
            Centering::None => Ok(0.0),
            Centering::Linear(mean) => Ok(j as f64 * mean),
            Centering::PerIndex(c) => c
                .get(j)
                .copied()
                .ok_or_else(|| Error::invalid(format!("centering has no entry for index {j}"))),
        }
    }
}

/// Normalized partial-sum and partial-maximum paths of `values` at the grid
/// times: the first `⌊N t⌋` values enter at time `t`. The maximum over an empty
/// prefix is 0.
pub fn sum_and_max_paths(
    values: &[f64],
    grid: &[f64],
    normalizer: f64,
    centering: &Centering,
) -> Result<(ProcessPath, ProcessPath)> {
    if !(normalizer > 0.0) {
        return Err(Error::invalid(format!("normalizer must be positive, got {normalizer}")));
    }
    let n = values.len();
    let mut prefix_sum = Vec::with_capacity(n + 1);
    let mut prefix_max = Vec::with_capacity(n + 1);
    prefix_sum.push(0.0);
    prefix_max.push(0.0f64);
    for &v in values {
        prefix_sum.push(prefix_sum.last().unwrap() + v);
        prefix_max.push(prefix_max.last().unwrap().max(v));
    }
    let mut sums = Vec::with_capacity(grid.len());
    let mut maxs = Vec::with_capacity(grid.len());
    for &t in grid {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("grid time {t} outside [0, 1]")));
        }
        let j = grid_index(n, t);
        sums.push((prefix_sum[j] - centering.at(j)?) / normalizer);
        maxs.push(prefix_max[j] / normalizer);
    }
    Ok((
        ProcessPath { times: grid.to_vec(), values: sums },
        ProcessPath { times: grid.to_vec(), values: maxs },
    ))
}

/// `⌊N t⌋`, the number of summands that have entered by time `t`.
pub fn grid_index(n: usize, t: f64) -> usize {
    // guard against 3 * (1/3) landing just below an integer
    ((n as f64 * t) * (1.0 + 4.0 * f64::EPSILON)).floor().clamp(0.0, n as f64) as usize
}

/// `k + 1` equispaced times on `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionalKind {
    Star(usize),
    Clique(usize),
}

impl FunctionalKind {
    fn validate(self) -> Result<()> {
        match self {
            FunctionalKind::Star(k) if k < 2 => Err(Error::invalid("star order must be at least 2")),
            FunctionalKind::Clique(m) if m < 3 => Err(Error::invalid("clique order must be at least 3")),
            _ => Ok(()),
        }
    }
}

/// Replicated counts at a deterministic anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredSample {
    pub depth: f64,
    pub kind: FunctionalKind,
    pub counts: Vec<u128>,
    pub mean: f64,
    pub std_dev: f64,
    /// Normal-approximation 95% interval for the mean.
    pub ci95: (f64, f64),
}

/// `D_k` or `C_m` at the anchor `(u, 0)` against a fresh cloud per replication.
/// The anchor itself is not a cloud member.
pub fn anchored_functional(
    params: &ModelParams,
    u: f64,
    kind: FunctionalKind,
    seed: u64,
    replications: usize,
) -> Result<AnchoredSample> {
    kind.validate()?;
    if !(0.0..=params.radius()).contains(&u) {
        return Err(Error::domain(format!("anchor depth {u} outside [0, {}]", params.radius())));
    }
    if replications == 0 {
        return Err(Error::invalid("at least one replication is required"));
    }
    let law = RadialLaw::new(params);
    let anchor = PolarPoint::anchor(u, params);
    let counts = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let cloud = sample_cloud_with(&law, params, seed, rep);
            anchored_count(params, &anchor, &cloud.points, kind)
        })
        .collect::<Result<Vec<_>>>()?;
    let r = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / r;
    let var = if counts.len() > 1 {
        counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    let std_dev = var.sqrt();
    let half = 1.96 * std_dev / r.sqrt();
    Ok(AnchoredSample { depth: u, kind, counts, mean, std_dev, ci95: (mean - half, mean + half) })
}

/// Counts at an external point against a set of cloud points.
pub fn anchored_count(params: &ModelParams, anchor: &PolarPoint, points: &[PolarPoint], kind: FunctionalKind) -> Result<u128> {
    let big_r = params.radius();
    let ra = anchor.radius(params);
    let adjacent = |p: &PolarPoint| {
        let d = distance_from_radii(ra, p.radius(params), half_angle_sin_sq(&anchor.angles, &p.angles));
        d > 0.0 && d <= big_r + BOUNDARY_BAND
    };
    match kind {
        FunctionalKind::Star(k) => {
            let degree = points.iter().filter(|p| adjacent(p)).count();
            falling_factorial(degree as u64, k - 1)
        }
        FunctionalKind::Clique(m) => {
            let mut lower: Vec<&PolarPoint> =
                points.iter().filter(|p| p.u <= anchor.u && adjacent(p)).collect();
            // local total order by depth, so that each clique is counted once
            lower.sort_by(|a, b| a.u.total_cmp(&b.u));
            let n = lower.len();
            let radii: Vec<f64> = lower.iter().map(|p| p.radius(params)).collect();
            let local_in: Vec<Vec<u32>> = (0..n)
                .map(|i| {
                    (0..i)
                        .filter(|&j| {
                            let d = distance_from_radii(
                                radii[i],
                                radii[j],
                                half_angle_sin_sq(&lower[i].angles, &lower[j].angles),
                            );
                            d > 0.0 && d <= big_r + BOUNDARY_BAND
                        })
                        .map(|j| j as u32)
                        .collect()
                })
                .collect();
            let all: Vec<u32> = (0..n as u32).collect();
            Ok(extend_cliques(&all, m - 1, &|w| local_in[w].as_slice()) as u128)
        }
    }
}
