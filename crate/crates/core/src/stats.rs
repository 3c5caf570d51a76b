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

//! Tail-index, goodness-of-fit and power-law slope estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub k_order: usize,
    pub index_estimate: f64,
    pub standard_error: f64,
}

/// `⌊N^{0.6}⌋`, clamped to `[2, N - 1]`.
pub fn default_k_order(n: usize) -> usize {
    (((n as f64).powf(0.6) + 1e-9).floor() as usize).clamp(2, n.saturating_sub(1).max(2))
}

/// Splits off nonpositive entries; returns the strictly positive values and
/// how many were dropped.
pub fn positive_values(data: impl IntoIterator<Item = f64>) -> (Vec<f64>, usize) {
    let mut dropped = 0;
    let kept = data
        .into_iter()
        .filter(|&x| {
            let keep = x > 0.0;
            if !keep {
                dropped += 1;
            }
            keep
        })
        .collect();
    (kept, dropped)
}

fn sorted_desc(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn hill_sorted(desc: &[f64], k: usize) -> Result<TailFit> {
    if k < 2 {
        return Err(Error::invalid(format!("k_order must be at least 2, got {k}")));
    }
    if desc.len() < k + 1 {
        return Err(Error::invalid(format!("need at least {} values, got {}", k + 1, desc.len())));
    }
    let threshold = desc[k];
    if !(threshold > 0.0) {
        return Err(Error::domain("the (k+1)-th largest value must be positive"));
    }
    let h = desc[..k].iter().map(|&x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if !(h > 0.0) {
        return Err(Error::domain("top order statistics are all equal"));
    }
    let index = 1.0 / h;
    Ok(TailFit { k_order: k, index_estimate: index, standard_error: index / (k as f64).sqrt() })
}

/// Hill estimate `1/H`, `H = (1/k) Σ_{i≤k} ln(X_(i)/X_(k+1))` over the
/// descending order statistics.
pub fn hill_estimator(data: &[f64], k_order: usize) -> Result<TailFit> {
    hill_sorted(&sorted_desc(data), k_order)
}

/// Hill estimates for several `k`, sorting the data once.
pub fn hill_plot(data: &[f64], ks: &[usize]) -> Vec<TailFit> {
    let desc = sorted_desc(data);
    ks.iter().filter_map(|&k| hill_sorted(&desc, k).ok()).collect()
}

/// Kolmogorov–Smirnov distance `sup |F_n - F|`, checking both one-sided ECDF
/// limits at every jump.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("KS distance of an empty sample"));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d.min(1.0))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::domain("log_slope needs strictly positive pairs"));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.len() < 2 || sxx == 0.0 {
        return Err(Error::invalid("log_slope needs at least two distinct abscissae"));
    }
    Ok(sxy / sxx)
}
