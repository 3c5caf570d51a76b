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

use statrs::distribution::{ChiSquared, ContinuousCDF};

use hrgg_core::sampler::{sample_cloud_with, RadialLaw};
use hrgg_core::stats::ks_distance;
use hrgg_core::ModelParams;

#[test]
fn depth_ks_passes_the_one_percent_critical_value() {
    for d in [2usize, 3] {
        let params = ModelParams::new(d, 0.8, 1e4).unwrap();
        let law = RadialLaw::new(&params);
        let passes = (0..100)
            .filter(|&rep| {
                let cloud = sample_cloud_with(&law, &params, 2024, rep);
                let depths: Vec<f64> = cloud.points.iter().map(|p| p.u).collect();
                let crit = 1.63 / (depths.len() as f64).sqrt();
                ks_distance(&depths, |t| law.cdf(t)).unwrap() < crit
            })
            .count();
        assert!(passes >= 90, "d = {d}: {passes}/100");
    }
}

#[test]
fn depth_chi_square_on_equal_probability_bins() {
    const BINS: usize = 50;
    for d in [2usize, 3] {
        let params = ModelParams::new(d, 0.8, 1e5).unwrap();
        let law = RadialLaw::new(&params);
        let edges: Vec<f64> = (1..BINS).map(|i| law.quantile(i as f64 / BINS as f64)).collect();
        let cloud = sample_cloud_with(&law, &params, 77, 0);
        let mut counts = [0usize; BINS];
        for p in &cloud.points {
            counts[edges.partition_point(|&e| e < p.u)] += 1;
        }
        let expected = cloud.len() as f64 / BINS as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p_value = 1.0 - ChiSquared::new((BINS - 1) as f64).unwrap().cdf(stat);
        assert!(p_value > 1e-3, "d = {d}: chi2 = {stat}, p = {p_value}");
    }
}
