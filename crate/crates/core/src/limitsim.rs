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

//! Constructive simulation of the limit processes from their Poisson
//! representations.
//!
//! Points of `PPP(Leb ⊗ m_β)` on `[0, 1] × (ε, ∞)` are generated exactly: the
//! count is Poisson with mean `ε^{-β}`, times are uniform and sizes are Pareto
//! with survival `(x/ε)^{-β}`. Jumps at or below `ε` are dropped. In centered
//! mode the drift `t β ε^{1-β}/(β-1)` of the retained jumps is subtracted, so
//! the omitted small jumps only contribute the reported residual variance
//! `β ε^{2-β}/(2-β)`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream_rng;
use crate::theory::StableKind;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

#[inline]
fn pareto_size<R: Rng + ?Sized>(beta: f64, epsilon: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1]
    epsilon * (1.0 - rng.random::<f64>()).powf(-1.0 / beta)
}

/// Points of `PPP(Leb ⊗ m_β)` on `[0, 1] × (ε, ∞)`, any `β > 0`.
pub fn sample_truncated_ppp<R: Rng + ?Sized>(beta: f64, epsilon: f64, rng: &mut R) -> Result<Vec<Jump>> {
    check_truncation(beta, epsilon)?;
    let k = poisson_count(epsilon.powf(-beta), rng);
    Ok((0..k)
        .map(|_| {
            let time = rng.random::<f64>();
            Jump { time, size: pareto_size(beta, epsilon, rng) }
        })
        .collect())
}

fn check_truncation(beta: f64, epsilon: f64) -> Result<()> {
    if !(beta > 0.0) || !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("need beta > 0 and epsilon > 0, got {beta}, {epsilon}")));
    }
    Ok(())
}

/// `∫_ε^∞ x m_β(dx) = β ε^{1-β}/(β-1)` for `β > 1`.
pub fn compensator(beta: f64, epsilon: f64) -> f64 {
    beta * epsilon.powf(1.0 - beta) / (beta - 1.0)
}

/// Variance of the dropped jumps, `∫_0^ε x² m_β(dx) = β ε^{2-β}/(2-β)`.
pub fn residual_variance(beta: f64, epsilon: f64) -> f64 {
    beta * epsilon.powf(2.0 - beta) / (2.0 - beta)
}

/// One realization of the joint (sum, running max) limit on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRealization {
    pub beta: f64,
    pub epsilon: f64,
    pub kind: StableKind,
    /// Sorted by time.
    pub jumps: Vec<Jump>,
    pub grid: Vec<f64>,
    pub sum_path: Vec<f64>,
    pub max_path: Vec<f64>,
    pub residual_variance: f64,
}

/// Simulates `(S, Y)` for tail index `beta`: `S` is the compensated sum in
/// centered mode or the plain truncated sum in subordinator mode, `Y` the
/// running maximum of jump sizes (0 before the first jump).
pub fn simulate_limit_star(
    beta: f64,
    epsilon: f64,
    grid: &[f64],
    kind: StableKind,
    seed: u64,
    realization: u64,
) -> Result<LimitRealization> {
    kind.check(beta)?;
    let mut rng = substream_rng(seed, realization);
    let mut jumps = sample_truncated_ppp(beta, epsilon, &mut rng)?;
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    let drift = match kind {
        StableKind::Centered => compensator(beta, epsilon),
        StableKind::Subordinator => 0.0,
    };
    let mut sum_path = Vec::with_capacity(grid.len());
    let mut max_path = Vec::with_capacity(grid.len());
    for &t in grid {
        let upto = jumps.partition_point(|j| j.time <= t);
        let s: f64 = jumps[..upto].iter().map(|j| j.size).sum();
        let y = jumps[..upto].iter().map(|j| j.size).fold(0.0, f64::max);
        sum_path.push(s - t * drift);
        max_path.push(y);
    }
    Ok(LimitRealization {
        beta,
        epsilon,
        kind,
        jumps,
        grid: grid.to_vec(),
        sum_path,
        max_path,
        residual_variance: residual_variance(beta, epsilon),
    })
}

/// `(S(1), Y(1))` for `count` realizations, without materializing jump lists.
pub fn limit_endpoints(beta: f64, epsilon: f64, kind: StableKind, seed: u64, count: usize) -> Result<Vec<(f64, f64)>> {
    kind.check(beta)?;
    check_truncation(beta, epsilon)?;
    let drift = match kind {
        StableKind::Centered => compensator(beta, epsilon),
        StableKind::Subordinator => 0.0,
    };
    let mean = epsilon.powf(-beta);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream_rng(seed, r);
            let k = poisson_count(mean, &mut rng);
            let mut sum = 0.0;
            let mut max = 0.0f64;
            for _ in 0..k {
                // consume the jump time so realization r matches simulate_limit_star
                let _time: f64 = rng.random();
                let x = pareto_size(beta, epsilon, &mut rng);
                sum += x;
                max = max.max(x);
            }
            (sum - drift, max)
        })
        .collect())
}

/// One sample of the bivariate limit at time 1 for cliques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateRealization {
    /// Jump pairs `(y, sqrt(y))`.
    pub jumps: Vec<(f64, f64)>,
    /// Uncompensated sum of the `α`-index jumps.
    pub stilde: f64,
    /// Compensated sum of the induced `2α`-index jumps.
    pub s2alpha: f64,
    /// `3 S_{2α}(1) / S̃_α(1)`, undefined without jumps.
    pub ratio: Option<f64>,
}

/// Jumps `y > ε` of `PPP(Leb ⊗ m_α)`, each contributing `y` to the first
/// coordinate and `sqrt(y)` to the second. The second coordinate is centered
/// by `∫_{√ε}^∞ x m_{2α}(dx)`.
pub fn simulate_bivariate_clique(alpha: f64, epsilon: f64, seed: u64, realization: u64) -> Result<BivariateRealization> {
    if !(alpha > 0.75 && alpha < 1.0) {
        return Err(Error::regime(format!("bivariate clique limit needs 3/4 < alpha < 1, got {alpha}")));
    }
    let mut rng = substream_rng(seed, realization);
    let sizes = sample_truncated_ppp(alpha, epsilon, &mut rng)?;
    let jumps: Vec<(f64, f64)> = sizes.iter().map(|j| (j.size, j.size.sqrt())).collect();
    let stilde: f64 = jumps.iter().map(|j| j.0).sum();
    let s2alpha = jumps.iter().map(|j| j.1).sum::<f64>() - compensator(2.0 * alpha, epsilon.sqrt());
    let ratio = (!jumps.is_empty()).then(|| 3.0 * s2alpha / stilde);
    Ok(BivariateRealization { jumps, stilde, s2alpha, ratio })
}

/// `κ((y1, ∞] × (y2, ∞]) = min(y1^{-α}, y2^{-2α})` for the Lévy measure
/// concentrated on `{(y, y^{1/2})}`.
pub fn bivariate_tail_measure(y1: f64, y2: f64, alpha: f64) -> f64 {
    y1.powf(-alpha).min(y2.powf(-2.0 * alpha))
}

/// CSV with header `realization,S1,Y1`.
pub fn write_star_samples<W: Write>(mut w: W, samples: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "realization,S1,Y1")?;
    for (i, (s, y)) in samples.iter().enumerate() {
        writeln!(w, "{i},{s:.16e},{y:.16e}")?;
    }
    Ok(())
}

/// CSV with header `realization,Stilde,S2alpha,ratio`; an undefined ratio is written as `NaN`.
pub fn write_bivariate_samples<W: Write>(mut w: W, samples: &[BivariateRealization]) -> Result<()> {
    writeln!(w, "realization,Stilde,S2alpha,ratio")?;
    for (i, b) in samples.iter().enumerate() {
        writeln!(w, "{i},{:.16e},{:.16e},{:.16e}", b.stilde, b.s2alpha, b.ratio.unwrap_or(f64::NAN))?;
    }
    Ok(())
}
