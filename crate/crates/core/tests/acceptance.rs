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

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Supplementary measurements are printed as INFO lines and never
//! affect the outcome.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hrgg_core::experiment::{run_replication, ReplicationData};
use hrgg_core::functionals::{anchored_functional, clique_count, clustering_coefficient, falling_factorial, star_count};
use hrgg_core::graph::{build_graph_naive, build_graph_sweep};
use hrgg_core::limitsim::{limit_endpoints, sample_truncated_ppp, simulate_bivariate_clique};
use hrgg_core::sampler::sample_cloud;
use hrgg_core::stats::{default_k_order, hill_estimator, ks_distance, log_slope, positive_values};
use hrgg_core::theory::{clique_mean_asymptote, star_mean_envelope, star_scaling, StableKind};
use hrgg_core::{
    build_graph, run_experiment, ExperimentConfig, FunctionalKind, HGraph, ModelParams, OutputFormat, PointCloud,
    PolarPoint, RadialLaw,
};

const SEED: u64 = 20_240_601;

struct Suite {
    passed: usize,
    failed: Vec<usize>,
}

impl Suite {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String, started: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
        if pass {
            self.passed += 1;
        } else {
            self.failed.push(id);
        }
    }
}

fn info(msg: String) {
    println!("INFO      {msg}");
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn config(d: usize, alpha: f64, n: f64, ks: &[usize], ms: &[usize], reps: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ModelParams::new(d, alpha, n).unwrap());
    c.ks = ks.to_vec();
    c.ms = ms.to_vec();
    c.reps = reps;
    c.seed = SEED;
    c
}

fn replications(c: &ExperimentConfig) -> Vec<ReplicationData> {
    let law = RadialLaw::new(&c.params);
    (0..c.reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(c, &law, rep).unwrap())
        .collect()
}

fn hill_default(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (positive, _) = positive_values(values);
    hill_estimator(&positive, default_k_order(positive.len())).ok().map(|f| f.index_estimate)
}

fn top_vertex_slope(r: &ReplicationData) -> Option<f64> {
    let d3 = &r.functionals.star[&3];
    let c3 = &r.functionals.clique[&3];
    let mut order: Vec<usize> = (0..d3.len()).collect();
    order.sort_by(|&a, &b| d3[b].cmp(&d3[a]).then(a.cmp(&b)));
    let pairs: Vec<(f64, f64)> = order
        .into_iter()
        .take(20)
        .filter(|&v| d3[v] > 0 && c3[v] > 0)
        .map(|v| (d3[v] as f64, c3[v] as f64))
        .collect();
    log_slope(&pairs).ok()
}

fn cliques_by_subsets(graph: &HGraph, m: usize) -> u64 {
    fn extend(graph: &HGraph, start: usize, m: usize, set: &mut Vec<usize>) -> u64 {
        if set.len() == m {
            return 1;
        }
        let mut total = 0;
        for v in start..graph.len() {
            if set.iter().all(|&s| graph.has_edge(s, v)) {
                set.push(v);
                total += extend(graph, v + 1, m, set);
                set.pop();
            }
        }
        total
    }
    extend(graph, 0, m, &mut Vec::new())
}

fn toy_graph(edges: &[(usize, usize)], n: usize) -> HGraph {
    let params = ModelParams::new(2, 0.8, 100.0).unwrap();
    let points = (0..n).map(|i| PolarPoint::new(1.0 + i as f64, vec![0.1 * i as f64])).collect();
    HGraph::from_edges(PointCloud { params, points, seed: 0, replication_id: 0 }, edges).unwrap()
}

fn main() -> ExitCode {
    let mut suite = Suite { passed: 0, failed: Vec::new() };
    let mut clustering_seen: Vec<f64> = Vec::new();

    // 1. model sanity
    let t = Instant::now();
    let r = ModelParams::new(2, 0.8, 1000.0).unwrap().radius();
    suite.record(1, "R_n for d=2, n=1000", (r - 13.8155).abs() <= 0.01, format!("R_n = {r:.6}"), t);

    // 2. exact oracles
    let t = Instant::now();
    let mut mismatches = 0usize;
    let mut checked_vertices = 0usize;
    let mut cliques_seen = [0u64; 5];
    for seed in 0..20 {
        let params = ModelParams::new(2, 0.6, 60.0).unwrap().with_poissonized(false);
        let g = build_graph(sample_cloud(&params, seed, 0));
        let o = g.depth_order();
        for v in 0..g.len() {
            checked_vertices += 1;
            for k in 2..=4 {
                if star_count(&g, v, k).unwrap() != falling_factorial(g.degree(v) as u64, k - 1).unwrap() {
                    mismatches += 1;
                }
            }
        }
        for m in [3usize, 4] {
            let total: u64 = (0..g.len()).map(|v| clique_count(&o, v, m).unwrap()).sum();
            if total != cliques_by_subsets(&g, m) {
                mismatches += 1;
            }
            cliques_seen[m] += total;
        }
    }
    suite.record(
        2,
        "star and clique counts vs enumeration",
        mismatches == 0 && cliques_seen[3] > 0 && cliques_seen[4] > 0,
        format!("{mismatches} mismatches over {checked_vertices} vertices; triangles {}, K4 {}", cliques_seen[3], cliques_seen[4]),
        t,
    );

    // 3, 4 and 8 share one experiment; their times are cumulative
    let t = Instant::now();
    let c = config(2, 0.8, 5e4, &[2, 3], &[3], 20);
    let reps = replications(&c);
    clustering_seen.extend(reps.iter().filter_map(|r| r.clustering));
    let degree_fits: Vec<f64> = reps
        .iter()
        .filter_map(|r| hill_default(r.functionals.degree.iter().map(|&d| d as f64)))
        .collect();
    let d3_fits: Vec<f64> = reps
        .iter()
        .filter_map(|r| hill_default(r.functionals.star[&3].iter().map(|&d| d as f64)))
        .collect();
    let slopes: Vec<f64> = reps.iter().filter_map(top_vertex_slope).collect();
    drop(reps);
    let (deg, d3, slope) = (mean(&degree_fits), mean(&d3_fits), mean(&slopes));
    suite.record(
        3,
        "degree tail index, d=2 alpha=0.8 n=5e4",
        degree_fits.len() == 20 && (1.40..=1.80).contains(&deg),
        format!("mean Hill {deg:.4} over {} replications (predicted 1.6)", degree_fits.len()),
        t,
    );
    suite.record(
        4,
        "D_3 tail index, d=2 alpha=0.8 n=5e4",
        d3_fits.len() == 20 && (0.65..=0.95).contains(&d3),
        format!("mean Hill {d3:.4} over {} replications (predicted 0.8)", d3_fits.len()),
        t,
    );
    suite.record(
        8,
        "top-20 log-slope of (D_3, C_3), alpha=0.8",
        slopes.len() == 20 && (0.40..=0.60).contains(&slope),
        format!("mean slope {slope:.4} over {} replications (predicted 0.5)", slopes.len()),
        t,
    );

    // 5. Fréchet maxima
    let t = Instant::now();
    let c = config(2, 1.5, 2e4, &[3], &[], 300);
    let a3 = star_scaling(&c.params, 3).unwrap().a_kn;
    let law = RadialLaw::new(&c.params);
    let (maxima, cc): (Vec<f64>, Vec<Option<f64>>) = (0..c.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let g = build_graph(hrgg_core::sampler::sample_cloud_with(&law, &c.params, c.seed, rep));
            let max_d3 = (0..g.len()).map(|v| star_count(&g, v, 3).unwrap()).max().unwrap_or(0);
            (max_d3 as f64 / a3, clustering_coefficient(&g))
        })
        .unzip();
    clustering_seen.extend(cc.into_iter().flatten());
    let ks = ks_distance(&maxima, |z| if z > 0.0 { (-z.powf(-1.5)).exp() } else { 0.0 }).unwrap();
    suite.record(
        5,
        "Frechet law of max D_3 / a_3n, alpha=1.5 n=2e4",
        ks < 0.12,
        format!("KS {ks:.4} over {} replications, a_3n = {a3:.2}", maxima.len()),
        t,
    );

    // 6. star moment envelope at an anchor
    let t = Instant::now();
    let params = ModelParams::new(2, 1.5, 1e5).unwrap();
    let sample = anchored_functional(&params, 5.0, FunctionalKind::Star(3), SEED, 200).unwrap();
    let (lower, upper) = star_mean_envelope(5.0, &params, 3, None).unwrap();
    suite.record(
        6,
        "anchored D_3 mean vs envelope, alpha=1.5 u=5",
        sample.mean >= 0.8 * lower && sample.mean <= 1.3 * upper,
        format!(
            "mean {:.2} (95% CI {:.2}..{:.2}) vs [0.8*{lower:.2}, 1.3*{upper:.2}]",
            sample.mean, sample.ci95.0, sample.ci95.1
        ),
        t,
    );

    // 7. clique mean at an anchor
    let t = Instant::now();
    let params = ModelParams::new(2, 0.85, 1e5).unwrap();
    let u = 0.5 * params.radius();
    let sample = anchored_functional(&params, u, FunctionalKind::Clique(3), SEED, 300).unwrap();
    let target = clique_mean_asymptote(u, &params, 3).unwrap();
    let rel = sample.mean / target - 1.0;
    suite.record(
        7,
        "anchored C_3 mean vs C_3 e^{u/2}, alpha=0.85 u=R/2",
        rel.abs() <= 0.25,
        format!(
            "mean {:.1} (95% CI {:.1}..{:.1}) vs {target:.1}, relative error {:+.3}",
            sample.mean, sample.ci95.0, sample.ci95.1, rel
        ),
        t,
    );

    // 9. limit simulator
    let t = Instant::now();
    let endpoints = limit_endpoints(1.5, 0.01, StableKind::Centered, SEED, 10_000).unwrap();
    let maxima: Vec<f64> = endpoints.iter().map(|e| e.1).collect();
    let ks_y = ks_distance(&maxima, |z| (-z.max(0.01).powf(-1.5)).exp()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let runs = 2000;
    let count_mean =
        (0..runs).map(|_| sample_truncated_ppp(2.0, 0.1, &mut rng).unwrap().len()).sum::<usize>() as f64 / runs as f64;
    let count_ok = (count_mean - 100.0).abs() < 3.0 * (100.0f64 / runs as f64).sqrt();
    let mut curve_ok = true;
    let mut curve_jumps = 0usize;
    for r in 0..500 {
        let b = simulate_bivariate_clique(0.85, 1e-2, SEED, r).unwrap();
        curve_jumps += b.jumps.len();
        curve_ok &= b.jumps.iter().all(|&(x1, x2)| x2 == x1.sqrt());
    }
    suite.record(
        9,
        "limit simulator",
        ks_y < 0.02 && count_ok && curve_ok,
        format!(
            "Y(1) KS {ks_y:.4}; mean jump count {count_mean:.2} (expect 100 +- {:.2}); {curve_jumps} bivariate jumps on the curve: {curve_ok}",
            3.0 * (100.0f64 / runs as f64).sqrt()
        ),
        t,
    );

    // 10. estimator calibration
    let t = Instant::now();
    let n = 100_000usize;
    let k_wide = (n as f64).powf(0.8).floor() as usize;
    let (hits_wide, hits_default): (usize, usize) = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ seed);
            let xs: Vec<f64> = (0..n).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.6)).collect();
            let near = |k: usize| ((hill_estimator(&xs, k).unwrap().index_estimate - 1.6).abs() < 0.05) as usize;
            (near(k_wide), near(default_k_order(n)))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    suite.record(
        10,
        "Hill on Pareto(1.6), n=1e5",
        hits_wide >= 95,
        format!("{hits_wide}/100 seeds within 0.05 at k = {k_wide}"),
        t,
    );
    info(format!(
        "at the default k = {} the same window holds for {hits_default}/100 seeds (standard error {:.3})",
        default_k_order(n),
        1.6 / (default_k_order(n) as f64).sqrt()
    ));

    // 11. invariant suite
    let t = Instant::now();
    for seed in 0..10 {
        for (d, alpha, n) in [(2usize, 0.6, 3000.0), (3, 0.8, 1500.0)] {
            let g = build_graph(sample_cloud(&ModelParams::new(d, alpha, n).unwrap(), SEED + seed, 0));
            clustering_seen.extend(clustering_coefficient(&g));
        }
    }
    let cc_ok = clustering_seen.iter().all(|c| (0.0..=0.5).contains(c));
    let toys = [
        clustering_coefficient(&toy_graph(&[(0, 1), (1, 2), (0, 2)], 3)),
        clustering_coefficient(&toy_graph(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], 4)),
        clustering_coefficient(&toy_graph(&[(0, 1), (1, 2)], 3)),
    ];
    let toys_ok = toys == [Some(0.5), Some(0.5), Some(0.0)];
    let params = ModelParams::new(2, 0.8, 2000.0).unwrap();
    let sweep_ok = (0..50).all(|seed| {
        let cloud = sample_cloud(&params, SEED + seed, 0);
        let fast: Vec<_> = build_graph_sweep(cloud.clone()).edges().collect();
        let slow: Vec<_> = build_graph_naive(cloud).edges().collect();
        fast == slow
    });
    let determinism_ok = {
        let base = std::env::temp_dir().join(format!("hrgg-acceptance-{}", std::process::id()));
        let mut identical = true;
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let mut c = config(2, 0.8, 3000.0, &[2, 3], &[3, 4], 6);
            c.format = format;
            c.anchor_depths = vec![2.0];
            // same output directory for both runs: the path is part of the embedded config
            c.out = base.join(format!("{format:?}"));
            let mut dirs = Vec::new();
            for workers in [1usize, 3] {
                let report = run_experiment(&c, Some(workers)).unwrap();
                dirs.push(report.files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>());
            }
            identical &= dirs[0] == dirs[1];
        }
        let _ = fs::remove_dir_all(&base);
        identical
    };
    suite.record(
        11,
        "invariants",
        cc_ok && toys_ok && sweep_ok && determinism_ok,
        format!(
            "CC in [0, 1/2] on {} graphs: {cc_ok}; triangle/K4/path CC {toys:?}; sweep == naive on 50 clouds: {sweep_ok}; byte-identical outputs across worker counts: {determinism_ok}",
            clustering_seen.len()
        ),
        t,
    );

    println!("{} passed, {} failed", suite.passed, suite.failed.len());
    if suite.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {:?}", suite.failed);
        ExitCode::FAILURE
    }
}
