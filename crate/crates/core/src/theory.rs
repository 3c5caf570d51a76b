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

//! Constants, moment envelopes, tail laws and characteristic functions that
//! the limit theorems for star and clique counts refer to.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::ModelParams;
use crate::quad;
use crate::rng::substream_rng;

/// Default Monte Carlo budget for `ℓ` when `m >= 4`.
pub const DEFAULT_ELL_BUDGET: usize = 200_000;

/// `κ_{d-2} = ∫_0^π sin^{d-2}θ dθ`.
pub fn kappa(d: usize) -> f64 {
    match d {
        2 => PI,
        3 => 2.0,
        _ => {
            let p = (d - 2) as i32;
            quad::integrate(|t| t.sin().powi(p), 0.0, PI, 1e-14, 0.0)
        }
    }
}

/// Volume of the unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// Surface area of the unit ball in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `B_α = 2^d α / ((d-1)(2α-1) κ_{d-2})`.
pub fn b_alpha(params: &ModelParams) -> f64 {
    let d = params.d() as f64;
    let a = params.alpha();
    2f64.powf(d) * a / ((d - 1.0) * (2.0 * a - 1.0) * kappa(params.d()))
}

/// Which limit applies to the star-count sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarRegime {
    /// `(k-1)/2 < α < k-1`: centered sums, zero-mean stable limit.
    Centered,
    /// `1/2 < α < (k-1)/2`: uncentered sums, stable subordinator limit.
    Subordinator,
    /// `α = (k-1)/2` exactly.
    Boundary,
    /// `α >= k-1`: Gaussian fluctuations, no stable limit.
    Gaussian,
}

pub fn star_regime(alpha: f64, k: usize) -> StarRegime {
    let km1 = (k - 1) as f64;
    if alpha >= km1 {
        StarRegime::Gaussian
    } else if alpha > km1 / 2.0 {
        StarRegime::Centered
    } else if alpha < km1 / 2.0 {
        StarRegime::Subordinator
    } else {
        StarRegime::Boundary
    }
}

/// True iff `(2m-3)/(2m-2) < α < 1`.
pub fn clique_regime_holds(alpha: f64, m: usize) -> bool {
    let lower = (2.0 * m as f64 - 3.0) / (2.0 * m as f64 - 2.0);
    alpha > lower && alpha < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarConstants {
    pub k: usize,
    pub kappa: f64,
    pub b_alpha: f64,
    pub b_k_alpha: f64,
    pub a_kn: f64,
    /// Tail index `2α/(k-1)`.
    pub beta: f64,
}

/// Scaling constants `a_{k,n} = B_α^{k-1} n^{(k-1)/(2α)}` for star counts.
pub fn star_scaling(params: &ModelParams, k: usize) -> Result<StarConstants> {
    if k < 2 {
        return Err(Error::invalid(format!("star order must be at least 2, got {k}")));
    }
    let a = params.alpha();
    let km1 = (k - 1) as f64;
    if !(a > 0.5 && a < km1) {
        return Err(Error::regime(format!(
            "star scaling for k = {k} needs 1/2 < alpha < {km1}, got alpha = {a}"
        )));
    }
    let b = b_alpha(params);
    let b_k = b.powf(km1);
    Ok(StarConstants {
        k,
        kappa: kappa(params.d()),
        b_alpha: b,
        b_k_alpha: b_k,
        a_kn: b_k * params.n().powf(km1 / (2.0 * a)),
        beta: 2.0 * a / km1,
    })
}

/// Value of `ℓ` with its Monte Carlo standard error (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliqueConstants {
    pub m: usize,
    /// Volume of the `(d-1)`-dimensional unit ball.
    pub xi: f64,
    /// Surface area of the unit ball in `R^d`.
    pub s: f64,
    pub ell_inf: EllEstimate,
    pub c_m_alpha: f64,
    pub b_mn: f64,
    /// Tail index `2α`.
    pub beta: f64,
    dim: usize,
}

impl CliqueConstants {
    /// `C_{m,α} e^{(d-1)u/2}`.
    pub fn mean_asymptote(&self, u: f64) -> f64 {
        self.c_m_alpha * (0.5 * (self.dim as f64 - 1.0) * u).exp()
    }
}

fn check_clique_regime(params: &ModelParams, m: usize) -> Result<()> {
    if m < 3 {
        return Err(Error::invalid(format!("clique order must be at least 3, got {m}")));
    }
    if !clique_regime_holds(params.alpha(), m) {
        return Err(Error::regime(format!(
            "clique limit for m = {m} needs {} < alpha < 1 (the lower bound marks a phase transition), got alpha = {}",
            (2.0 * m as f64 - 3.0) / (2.0 * m as f64 - 2.0),
            params.alpha()
        )));
    }
    Ok(())
}

/// `C_{m,α} = 2^{d-1} ξ_{d-1} (α(d-1)/s_{d-1})^{m-1} ℓ(∞)` and `b_{m,n} = C_{m,α} n^{1/(2α)}`.
/// `budget` is the Monte Carlo sample count used for `ℓ(∞)` when `m >= 4`.
pub fn clique_scaling(params: &ModelParams, m: usize, budget: usize) -> Result<CliqueConstants> {
    check_clique_regime(params, m)?;
    let d = params.d();
    let a = params.alpha();
    let xi = unit_ball_volume(d - 1);
    let s = unit_sphere_area(d);
    let ell_inf = ell(f64::INFINITY, params, m, budget)?;
    let c = 2f64.powi(d as i32 - 1) * xi * (a * (d as f64 - 1.0) / s).powi(m as i32 - 1) * ell_inf.value;
    Ok(CliqueConstants {
        m,
        xi,
        s,
        ell_inf,
        c_m_alpha: c,
        b_mn: c * params.n().powf(1.0 / (2.0 * a)),
        beta: 2.0 * a,
        dim: d,
    })
}

/// Exponential rates of the reduced `ℓ` integral.
///
/// With `t_1 = s` and `t_i = s + y_i`, the integrand of `ℓ` factors as
/// `K e^{-c s} Π_i e^{-λ y_i} P(y)`, where `P(y)` is the probability that
/// independent uniform points `w_i` in balls of radius `2e^{y_i/2}` satisfy
/// `|w_i - w_j| <= 2 e^{(y_i + y_j)/2}`; `P` does not depend on `s`.
struct EllRates {
    /// `ξ_{d-1}^{m-2} 2^{(d-1)(m-2)}`
    k: f64,
    /// `(d-1)((2m-2)α - (2m-3))/2`
    c: f64,
    /// `(d-1)(α - 1/2)`
    lambda: f64,
}

impl EllRates {
    fn new(params: &ModelParams, m: usize) -> Self {
        let dm1 = params.d() as f64 - 1.0;
        let a = params.alpha();
        let mf = m as f64;
        EllRates {
            k: unit_ball_volume(params.d() - 1).powi(m as i32 - 2) * 2f64.powf(dm1 * (mf - 2.0)),
            c: 0.5 * dm1 * ((2.0 * mf - 2.0) * a - (2.0 * mf - 3.0)),
            lambda: dm1 * (a - 0.5),
        }
    }
}

/// The function `ℓ(u)`; `u = ∞` gives `ℓ(∞)`.
///
/// `m = 3` uses the closed form. For `m >= 4` the value is a Monte Carlo
/// estimate with `budget` samples (fixed internal seed) and a reported
/// standard error.
pub fn ell(u: f64, params: &ModelParams, m: usize, budget: usize) -> Result<EllEstimate> {
    if m < 3 {
        return Err(Error::invalid(format!("clique order must be at least 3, got {m}")));
    }
    if m == 3 {
        return ell_closed_form_m3(u, params);
    }
    let seed = 0x6c6c_u64 ^ params.alpha().to_bits() ^ ((params.d() as u64) << 48);
    ell_monte_carlo(u, params, m, budget, seed)
}

/// `m = 3` closed form: `ℓ(u) = K/λ ((1 - e^{-cu})/c - (e^{-λu} - e^{-cu})/(c - λ))`.
pub fn ell_closed_form_m3(u: f64, params: &ModelParams) -> Result<EllEstimate> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::domain(format!("ell needs u >= 0, got {u}")));
    }
    let r = EllRates::new(params, 3);
    if u.is_infinite() {
        if r.c <= 0.0 {
            return Err(Error::regime("ell(inf) diverges for alpha <= 3/4 at m = 3"));
        }
        return Ok(EllEstimate { value: r.k / (r.c * r.lambda), std_error: 0.0 });
    }
    // ∫_0^u e^{-cs} (1 - e^{-λ(u-s)}) / λ ds
    let first = if r.c.abs() < 1e-12 { u } else { -(-r.c * u).exp_m1() / r.c };
    let diff = r.c - r.lambda;
    let second = if diff.abs() < 1e-12 {
        u * (-r.lambda * u).exp()
    } else {
        ((-r.lambda * u).exp() - (-r.c * u).exp()) / diff
    };
    Ok(EllEstimate { value: r.k / r.lambda * (first - second), std_error: 0.0 })
}

/// Monte Carlo evaluation of `ℓ(u)` for any `m >= 3`, stratified over the
/// outer depth variable `s`.
pub fn ell_monte_carlo(u: f64, params: &ModelParams, m: usize, budget: usize, seed: u64) -> Result<EllEstimate> {
    if m < 3 {
        return Err(Error::invalid(format!("clique order must be at least 3, got {m}")));
    }
    if u.is_nan() || u < 0.0 {
        return Err(Error::domain(format!("ell needs u >= 0, got {u}")));
    }
    if budget == 0 {
        return Err(Error::invalid("Monte Carlo budget must be positive"));
    }
    let r = EllRates::new(params, m);
    if u.is_infinite() && r.c <= 0.0 {
        return Err(Error::regime(format!("ell(inf) diverges outside the clique regime for m = {m}")));
    }
    if u == 0.0 {
        return Ok(EllEstimate { value: 0.0, std_error: 0.0 });
    }
    let free = m - 2;
    let dim = params.d() - 1;
    // mass of the s-law restricted to [0, u], and the y-normalization
    let s_mass = if u.is_infinite() { 1.0 / r.c } else { -(-r.c * u).exp_m1() / r.c };
    let factorial: f64 = (1..=free).map(|i| i as f64).product();
    let scale = r.k * s_mass / (factorial * r.lambda.powi(free as i32));

    let mut rng = substream_rng(seed, m as u64);
    let y_law = Exp::new(r.lambda).expect("positive rate");
    let mut hits = 0usize;
    let mut ys = vec![0.0; free];
    let mut ws = vec![0.0; free * dim];
    for j in 0..budget {
        let s = if u.is_infinite() {
            0.0
        } else {
            // stratified draw from the density ∝ e^{-cs} on [0, u]
            let q = (j as f64 + rng.random::<f64>()) / budget as f64;
            -(-q * (-(-r.c * u).exp_m1())).ln_1p() / r.c
        };
        let mut ok = true;
        for y in ys.iter_mut() {
            *y = y_law.sample(&mut rng);
            if u.is_finite() && *y > u - s {
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        for (i, &y) in ys.iter().enumerate() {
            uniform_in_ball(&mut rng, 2.0 * (0.5 * y).exp(), &mut ws[i * dim..(i + 1) * dim]);
        }
        let all_close = (0..free).all(|i| {
            (i + 1..free).all(|l| {
                let dist2: f64 = ws[i * dim..(i + 1) * dim]
                    .iter()
                    .zip(&ws[l * dim..(l + 1) * dim])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dist2.sqrt() <= 2.0 * (0.5 * (ys[i] + ys[l])).exp()
            })
        });
        if all_close {
            hits += 1;
        }
    }
    let p = hits as f64 / budget as f64;
    Ok(EllEstimate {
        value: scale * p,
        std_error: scale * (p * (1.0 - p) / budget as f64).sqrt(),
    })
}

fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64, out: &mut [f64]) {
    let dim = out.len();
    if dim == 1 {
        out[0] = radius * (2.0 * rng.random::<f64>() - 1.0);
        return;
    }
    let mut norm = 0.0;
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
        norm += *x * *x;
    }
    let scale = radius * rng.random::<f64>().powf(1.0 / dim as f64) / norm.sqrt();
    out.iter_mut().for_each(|x| *x *= scale);
}

/// Admissible range `((d-1)(m-4α)_+ / ((d-1)(m-4α)_+ + 1), 1)` for `δ`.
pub fn delta_interval(params: &ModelParams, m: usize) -> (f64, f64) {
    let x = (params.d() as f64 - 1.0) * (m as f64 - 4.0 * params.alpha()).max(0.0);
    (x / (x + 1.0), 1.0)
}

/// `ℓ'(u)`, the error envelope in the clique mean lower bound; `delta`
/// defaults to the midpoint of [`delta_interval`].
pub fn ell_prime(u: f64, params: &ModelParams, m: usize, delta: Option<f64>) -> Result<f64> {
    let (lo, hi) = delta_interval(params, m);
    let delta = delta.unwrap_or(0.5 * (lo + hi));
    if !(delta > lo && delta < hi) {
        return Err(Error::domain(format!("delta {delta} outside ({lo}, {hi})")));
    }
    let dm1 = params.d() as f64 - 1.0;
    let a = params.alpha();
    let mf = m as f64;
    let pos = (mf - 4.0 * a).max(0.0);
    Ok((-delta * u / 4.0).exp()
        + (0.5 * (dm1 * pos * (1.0 - delta) - delta) * u).exp()
        + (0.5 * dm1 * (2.0 * mf - 3.0 - (2.0 * mf - 2.0) * a) * (1.0 - delta) * u).exp())
}

/// Midpoint of the admissible interval `(1/(2α), 1)` for `γ`.
pub fn default_gamma(alpha: f64) -> f64 {
    0.5 * (1.0 / (2.0 * alpha) + 1.0)
}

/// Asymptotic lower and upper envelopes of the mean star count at depth `u`.
pub fn star_mean_envelope(u: f64, params: &ModelParams, k: usize, gamma: Option<f64>) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(Error::invalid(format!("star order must be at least 2, got {k}")));
    }
    let a = params.alpha();
    let gamma = gamma.unwrap_or_else(|| default_gamma(a));
    if !(gamma > 1.0 / (2.0 * a) && gamma < 1.0) {
        return Err(Error::domain(format!("gamma {gamma} outside (1/(2 alpha), 1)")));
    }
    if !(u > 0.0 && u < gamma * params.radius()) {
        return Err(Error::domain(format!("u = {u} outside (0, {})", gamma * params.radius())));
    }
    let dm1 = params.d() as f64 - 1.0;
    let km1 = (k - 1) as i32;
    let b = b_alpha(params);
    let b_k = b.powi(km1);
    let s_n = params.n().powf(-(2.0 * a - 1.0) * (1.0 - gamma)) * (a * dm1 * params.omega()?).exp() / b;
    let decay = (0.5 * dm1 * (1.0 - 2.0 * a) * u).exp();
    let growth = (0.5 * dm1 * (k - 1) as f64 * u).exp();
    let lower = b_k * (1.0 - decay).powi(km1) * growth;
    let mut sum = 0.0;
    for l in 0..=(k - 2) {
        sum += binomial(k - 1, l) * (decay + s_n).powi(km1 - l as i32);
    }
    let upper = b_k * (1.0 + sum) * growth;
    Ok((lower, upper))
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C_{m,α} e^{(d-1)u/2}`, the limit of the mean clique count at depth `u`.
pub fn clique_mean_asymptote(u: f64, params: &ModelParams, m: usize) -> Result<f64> {
    Ok(clique_scaling(params, m, DEFAULT_ELL_BUDGET)?.mean_asymptote(u))
}

/// `m_β((y, ∞]) = y^{-β}`.
pub fn tail_measure(y: f64, beta: f64) -> f64 {
    y.powf(-beta)
}

/// Finite-dimensional CDF of the extremal `β`-Fréchet process:
/// `exp(-Σ_j (t_j - t_{j-1}) min(z_j, ..., z_m)^{-β})` with `t_0 = 0`.
pub fn frechet_fidi_cdf(ts: &[f64], zs: &[f64], beta: f64) -> Result<f64> {
    if ts.len() != zs.len() || ts.is_empty() {
        return Err(Error::invalid("times and thresholds must be nonempty and of equal length"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let mut prev = 0.0;
    for &t in ts {
        if !(t > prev) {
            return Err(Error::invalid("times must be strictly increasing and positive"));
        }
        prev = t;
    }
    if zs.iter().any(|z| z.is_nan() || *z < 0.0) {
        return Err(Error::invalid("thresholds must be nonnegative"));
    }
    let mut exponent = 0.0;
    let mut running_min = f64::INFINITY;
    for j in (0..ts.len()).rev() {
        running_min = running_min.min(zs[j]);
        let dt = ts[j] - if j == 0 { 0.0 } else { ts[j - 1] };
        if running_min == 0.0 {
            return Ok(0.0);
        }
        exponent += dt * running_min.powf(-beta);
    }
    Ok((-exponent).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StableKind {
    /// Zero-mean `β`-stable process, `β ∈ (1, 2)`.
    Centered,
    /// `β`-stable subordinator, `β ∈ (0, 1)`.
    Subordinator,
}

impl StableKind {
    pub fn check(self, beta: f64) -> Result<()> {
        let ok = match self {
            StableKind::Centered => beta > 1.0 && beta < 2.0,
            StableKind::Subordinator => beta > 0.0 && beta < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::regime(format!("beta = {beta} is outside the range for {self:?}")))
        }
    }
}

/// Lévy exponent at unit frequency, `∫_0^∞ (e^{iy} - 1 - iy[centered]) β y^{-β-1} dy`,
/// by Gauss–Kronrod on half-period panels with series corrections at both ends.
fn levy_exponent_unit(beta: f64, kind: StableKind) -> Complex64 {
    const SMALL: f64 = 1e-2;
    let periods = 100.0;
    let big = 2.0 * PI * periods;
    let centered = kind == StableKind::Centered;
    let w = |p: f64| beta * SMALL.powf(p - beta) / (p - beta);

    // [0, SMALL]: Taylor series of cos y - 1 and sin y - y[centered]
    let mut re = -w(2.0) / 2.0 + w(4.0) / 24.0 - w(6.0) / 720.0;
    let mut im = -w(3.0) / 6.0 + w(5.0) / 120.0 - w(7.0) / 5040.0;
    if !centered {
        im += w(1.0);
    }

    // [SMALL, big]
    let f_re = |y: f64| (y.cos() - 1.0) * beta * y.powf(-beta - 1.0);
    let f_im = |y: f64| (y.sin() - if centered { y } else { 0.0 }) * beta * y.powf(-beta - 1.0);
    let mut a = SMALL;
    let mut b = PI;
    while a < big {
        re += quad::integrate(f_re, a, b, 1e-12, 1e-14);
        im += quad::integrate(f_im, a, b, 1e-12, 1e-14);
        a = b;
        b = (b + PI).min(big);
    }

    // [big, ∞): non-oscillatory parts exactly; ∫ e^{iy} f(y) dy by three
    // integrations by parts, e^{i big} = 1
    re -= big.powf(-beta);
    if centered {
        im -= beta * big.powf(1.0 - beta) / (beta - 1.0);
    }
    let f0 = beta * big.powf(-beta - 1.0);
    let f1 = -(beta + 1.0) * f0 / big;
    let f2 = -(beta + 2.0) * f1 / big;
    re += -f1;
    im += f0 - f2;
    Complex64::new(re, im)
}

/// Characteristic function `E exp(i v S(t))` of the stable limit.
pub fn stable_cf(v: f64, t: f64, beta: f64, kind: StableKind) -> Result<Complex64> {
    kind.check(beta)?;
    if v == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    // ψ(v) = |v|^β ψ(1) for v > 0 and ψ(-v) = conj ψ(v)
    let mut psi = levy_exponent_unit(beta, kind) * v.abs().powf(beta);
    if v < 0.0 {
        psi = psi.conj();
    }
    Ok((psi * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionProbability {
    pub value: f64,
    /// True iff `t1 + t2 <= R_n - ω_n`.
    pub valid: bool,
}

/// Asymptotic probability that points at depths `t1`, `t2` with independent
/// uniform directions are adjacent.
pub fn connection_probability(t1: f64, t2: f64, params: &ModelParams) -> ConnectionProbability {
    let d = params.d() as f64;
    let r = params.radius();
    let pref = 2f64.powf(d - 1.0) / ((d - 1.0) * kappa(params.d()));
    let value = pref * (-0.5 * (d - 1.0) * (r - t1 - t2)).exp();
    let valid = params.omega().map(|w| t1 + t2 <= r - w).unwrap_or(false);
    ConnectionProbability { value, valid }
}
