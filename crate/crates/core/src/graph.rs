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

//! Construction of `HG(R_n; α)` and its depth orientation.
//!
//! Two points are adjacent iff `0 < d_H(p, q) <= R_n`. Distances within
//! [`BOUNDARY_BAND`] above `R_n` are accepted so that edge decisions do not
//! depend on the last ulp of `sinh`. Coincident points are never adjacent.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance_from_parts, max_connection_angle_radii, unit_vector};
use crate::sampler::PointCloud;

pub const BOUNDARY_BAND: f64 = 1e-12;

/// Relative widening of angular windows so the boundary band is never pruned.
const WINDOW_SLACK: f64 = 1e-9;

/// Immutable hyperbolic graph over a point cloud.
///
/// Adjacency is stored in compressed form with every neighbor list sorted by
/// vertex index.
#[derive(Debug, Clone)]
pub struct HGraph {
    cloud: PointCloud,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    depth_rank: Vec<u32>,
    rank_of: Vec<u32>,
}

/// Per-point values reused by every distance evaluation.
struct Prepared {
    radius: Vec<f64>,
    sinh: Vec<f64>,
    /// d = 2: the single angle; otherwise flattened unit vectors.
    coords: Vec<f64>,
    dim: usize,
}

impl Prepared {
    fn new(cloud: &PointCloud) -> Self {
        let big_r = cloud.params.radius();
        let dim = cloud.params.d();
        let radius: Vec<f64> = cloud.points.iter().map(|p| big_r - p.u).collect();
        let sinh = radius.iter().map(|r| r.sinh()).collect();
        let coords = if dim == 2 {
            cloud.points.iter().map(|p| p.angles[0]).collect()
        } else {
            cloud.points.iter().flat_map(|p| unit_vector(&p.angles)).collect()
        };
        Prepared { radius, sinh, coords, dim }
    }

    #[inline]
    fn half_sin_sq(&self, i: usize, j: usize) -> f64 {
        if self.dim == 2 {
            let s = (0.5 * (self.coords[i] - self.coords[j])).sin();
            s * s
        } else {
            let a = &self.coords[i * self.dim..(i + 1) * self.dim];
            let b = &self.coords[j * self.dim..(j + 1) * self.dim];
            0.25 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        }
    }

    #[inline]
    fn connected(&self, i: usize, j: usize, big_r: f64) -> bool {
        let d = distance_from_parts(
            self.radius[i],
            self.radius[j],
            self.sinh[i],
            self.sinh[j],
            self.half_sin_sq(i, j),
        );
        d > 0.0 && d <= big_r + BOUNDARY_BAND
    }
}

/// Builds the graph; d = 2 uses the banded angular sweep, higher dimensions
/// scan all pairs.
pub fn build_graph(cloud: PointCloud) -> HGraph {
    if cloud.params.d() == 2 {
        build_graph_sweep(cloud)
    } else {
        build_graph_naive(cloud)
    }
}

/// Exact all-pairs construction, parallel over vertices.
pub fn build_graph_naive(cloud: PointCloud) -> HGraph {
    let prep = Prepared::new(&cloud);
    let big_r = cloud.params.radius();
    let n = cloud.len();
    let lists: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j != i && prep.connected(i, j, big_r)).map(|j| j as u32).collect())
        .collect();
    HGraph::from_lists(cloud, lists)
}

struct Band {
    max_depth: f64,
    /// (angle, vertex) sorted by angle.
    members: Vec<(f64, u32)>,
}

/// d = 2 construction: vertices are grouped into unit-width depth bands and
/// sorted by angle inside each band. For vertex `i` and band `b`, only the
/// circular window of half-width `θ*(u_i, max depth of b)` is scanned, and every
/// candidate is checked with the exact distance.
pub fn build_graph_sweep(cloud: PointCloud) -> HGraph {
    assert_eq!(cloud.params.d(), 2, "angular sweep requires d = 2");
    let prep = Prepared::new(&cloud);
    let big_r = cloud.params.radius();
    let n_bands = big_r.ceil() as usize + 1;
    let mut bands: Vec<Band> =
        (0..n_bands).map(|_| Band { max_depth: f64::NEG_INFINITY, members: Vec::new() }).collect();
    for (i, p) in cloud.points.iter().enumerate() {
        let b = (p.u.floor() as usize).min(n_bands - 1);
        bands[b].max_depth = bands[b].max_depth.max(p.u);
        bands[b].members.push((p.angles[0], i as u32));
    }
    bands.retain(|b| !b.members.is_empty());
    for b in &mut bands {
        b.members.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    }

    let n = cloud.len();
    let lists: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let phi = prep.coords[i];
            let mut out = Vec::new();
            let mut check = |j: u32| {
                if j as usize != i && prep.connected(i, j as usize, big_r) {
                    out.push(j);
                }
            };
            for band in &bands {
                let width = max_connection_angle_radii(prep.radius[i], big_r - band.max_depth, big_r);
                let width = width * (1.0 + WINDOW_SLACK) + BOUNDARY_BAND;
                if width >= PI {
                    band.members.iter().for_each(|&(_, j)| check(j));
                    continue;
                }
                for (lo, hi) in circular_ranges(phi - width, phi + width) {
                    let start = band.members.partition_point(|m| m.0 < lo);
                    let end = band.members.partition_point(|m| m.0 <= hi);
                    band.members[start..end].iter().for_each(|&(_, j)| check(j));
                }
            }
            out.sort_unstable();
            out
        })
        .collect();
    HGraph::from_lists(cloud, lists)
}

/// Splits `[lo, hi]` (with `hi - lo < 2π`) into at most two ranges inside `[0, 2π)`.
fn circular_ranges(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    if lo < 0.0 {
        vec![(lo + TAU, TAU), (0.0, hi)]
    } else if hi >= TAU {
        vec![(lo, TAU), (0.0, hi - TAU)]
    } else {
        vec![(lo, hi)]
    }
}

impl HGraph {
    fn from_lists(cloud: PointCloud, lists: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut total = 0;
        for l in &lists {
            total += l.len();
            offsets.push(total);
        }
        let targets = lists.into_iter().flatten().collect();
        let mut depth_rank: Vec<u32> = (0..cloud.len() as u32).collect();
        depth_rank.sort_by(|&a, &b| {
            cloud.points[a as usize].u.total_cmp(&cloud.points[b as usize].u).then(a.cmp(&b))
        });
        let mut rank_of = vec![0u32; cloud.len()];
        for (rank, &v) in depth_rank.iter().enumerate() {
            rank_of[v as usize] = rank as u32;
        }
        HGraph { cloud, offsets, targets, depth_rank, rank_of }
    }

    /// Builds a graph with an explicit edge list over `cloud` (no geometric rule).
    pub fn from_edges(cloud: PointCloud, edges: &[(usize, usize)]) -> Result<Self> {
        let n = cloud.len();
        let mut lists = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::invalid(format!("bad edge ({a}, {b})")));
            }
            lists[a].push(b as u32);
            lists[b].push(a as u32);
        }
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self::from_lists(cloud, lists))
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    /// Vertices sorted by depth ascending, ties by index.
    pub fn depth_rank(&self) -> &[u32] {
        &self.depth_rank
    }

    /// Position of `v` in [`depth_rank`](Self::depth_rank).
    pub fn rank_of(&self, v: usize) -> u32 {
        self.rank_of[v]
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len())
            .flat_map(move |i| self.neighbors(i).iter().filter(move |&&j| j as usize > i).map(move |&j| (i, j as usize)))
    }

    /// Orients every edge from the smaller to the larger depth.
    pub fn depth_order(&self) -> Orientation {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        let mut inward = Vec::with_capacity(n);
        for v in 0..n {
            let rv = self.rank_of[v];
            let (up, down): (Vec<u32>, Vec<u32>) =
                self.neighbors(v).iter().partition(|&&w| self.rank_of[w as usize] > rv);
            out.push(up);
            inward.push(down);
        }
        Orientation { out, inward }
    }

    /// Edge-list CSV: header `i,j`, then one row per edge with `i < j`.
    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j")?;
        for (i, j) in self.edges() {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }
}

/// Depth orientation of an [`HGraph`]; all lists are sorted by vertex index.
#[derive(Debug, Clone)]
pub struct Orientation {
    out: Vec<Vec<u32>>,
    inward: Vec<Vec<u32>>,
}

impl Orientation {
    /// Neighbors of larger depth (closer to the origin).
    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        &self.out[v]
    }

    /// Neighbors of smaller depth (closer to the boundary).
    pub fn in_neighbors(&self, v: usize) -> &[u32] {
        &self.inward[v]
    }

    pub fn out_degree_sum(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hyperbolic_distance, ModelParams, PolarPoint};
    use crate::sampler::sample_cloud;

    fn cloud_of(params: ModelParams, points: Vec<PolarPoint>) -> PointCloud {
        PointCloud { params, points, seed: 0, replication_id: 0 }
    }

    #[test]
    fn two_points_at_half_radius() {
        let p = ModelParams::new(2, 0.8, 1000.0).unwrap();
        let r = p.radius();
        // colinear: distance = |r1 - r2| = R/2
        let pts = vec![PolarPoint::new(0.0, vec![1.0]), PolarPoint::new(0.5 * r, vec![1.0])];
        let g = build_graph(cloud_of(p, pts));
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn coincident_points_are_not_adjacent() {
        let p = ModelParams::new(2, 0.8, 1000.0).unwrap();
        let pts = vec![PolarPoint::new(3.0, vec![1.0]); 2];
        assert_eq!(build_graph(cloud_of(p, pts.clone())).edge_count(), 0);
        assert_eq!(build_graph_naive(cloud_of(p, pts)).edge_count(), 0);
    }

    #[test]
    fn sweep_matches_all_pairs() {
        let p = ModelParams::new(2, 0.7, 2000.0).unwrap();
        for seed in 0..50 {
            let cloud = sample_cloud(&p, seed, 0);
            let a = build_graph_sweep(cloud.clone());
            let b = build_graph_naive(cloud);
            assert_eq!(a.edge_count(), b.edge_count(), "seed {seed}");
            assert_eq!(a.targets, b.targets, "seed {seed}");
        }
    }

    #[test]
    fn edges_respect_the_rule() {
        let p = ModelParams::new(3, 0.9, 400.0).unwrap();
        let g = build_graph(sample_cloud(&p, 4, 0));
        assert!(g.edge_count() > 0);
        for v in 0..g.len() {
            for &w in g.neighbors(v) {
                assert!(g.has_edge(w as usize, v), "asymmetric");
                assert_ne!(w as usize, v);
                let d = hyperbolic_distance(&g.cloud().points[v], &g.cloud().points[w as usize], &p).unwrap();
                assert!(d > 0.0 && d <= p.radius() + BOUNDARY_BAND);
            }
        }
    }

    #[test]
    fn orientation_of_a_path() {
        let p = ModelParams::new(2, 0.8, 1000.0).unwrap();
        let pts = (1..=3).map(|u| PolarPoint::new(u as f64, vec![0.0])).collect();
        let g = HGraph::from_edges(cloud_of(p, pts), &[(0, 1), (1, 2)]).unwrap();
        let o = g.depth_order();
        assert_eq!(o.out_neighbors(0), &[1]);
        assert_eq!(o.out_neighbors(1), &[2]);
        assert!(o.out_neighbors(2).is_empty());
        assert_eq!(o.in_neighbors(2), &[1]);
        assert_eq!(o.out_degree_sum(), g.edge_count());
    }

    #[test]
    fn depth_ties_break_by_index() {
        let p = ModelParams::new(2, 0.8, 1000.0).unwrap();
        let pts = vec![PolarPoint::new(2.0, vec![0.0]), PolarPoint::new(2.0, vec![1.0])];
        let g = HGraph::from_edges(cloud_of(p, pts), &[(0, 1)]).unwrap();
        assert_eq!(g.depth_rank(), &[0, 1]);
        assert_eq!(g.depth_order().out_neighbors(0), &[1]);
    }

    #[test]
    fn from_edges_rejects_loops() {
        let p = ModelParams::new(2, 0.8, 1000.0).unwrap();
        let pts = vec![PolarPoint::new(2.0, vec![0.0])];
        assert!(HGraph::from_edges(cloud_of(p, pts), &[(0, 0)]).is_err());
    }

    #[test]
    fn edge_csv_lists_each_edge_once() {
        let p = ModelParams::new(2, 0.8, 300.0).unwrap();
        let g = build_graph(sample_cloud(&p, 1, 0));
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), g.edge_count() + 1);
        for line in text.lines().skip(1) {
            let (i, j) = line.split_once(',').unwrap();
            assert!(i.parse::<usize>().unwrap() < j.parse::<usize>().unwrap());
        }
    }
}
