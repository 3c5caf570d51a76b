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

//! Coordinates on the Poincaré ball and hyperbolic distance.
//!
//! A point is stored in polar form relative to the ball `B(o, R_n)`: its radial
//! *depth* `u = R_n - d_H(o, p)` measured inward from the boundary, and its
//! hyperspherical angles. Curvature is fixed at -1.
//!
//! All distances go through [`distance_from_radii`], which evaluates
//!
//! ```text
//! sinh²(d/2) = sinh²((r_p - r_q)/2) + sinh(r_p) sinh(r_q) sin²(θ/2)
//! ```
//!
//! This is the half-angle rewrite of
//! `cosh d = cosh(r_p - r_q) + 2 sinh r_p sinh r_q sin²(θ/2)` and never forms
//! `cosh d - 1` by subtraction, so distances near zero and near the connection
//! radius keep full relative precision.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: dimension, tail parameter, intensity and the derived radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsInput", into = "ParamsInput")]
pub struct ModelParams {
    d: usize,
    alpha: f64,
    n: f64,
    radius: f64,
    poissonized: bool,
}

/// Serialized form of [`ModelParams`]; the radius is always re-derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamsInput {
    pub d: usize,
    pub alpha: f64,
    pub n: f64,
    #[serde(default = "default_true")]
    pub poissonized: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<ParamsInput> for ModelParams {
    type Error = Error;

    fn try_from(p: ParamsInput) -> Result<Self> {
        let params = ModelParams::new(p.d, p.alpha, p.n)?;
        Ok(params.with_poissonized(p.poissonized))
    }
}

impl From<ModelParams> for ParamsInput {
    fn from(p: ModelParams) -> Self {
        ParamsInput { d: p.d, alpha: p.alpha, n: p.n, poissonized: p.poissonized }
    }
}

impl ModelParams {
    /// Validates `d >= 2`, `alpha > 1/2`, `n > 1` and derives `R_n = 2 ln(n) / (d - 1)`.
    pub fn new(d: usize, alpha: f64, n: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {d}")));
        }
        if !(alpha > 0.5) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must exceed 1/2, got {alpha}")));
        }
        if !(n > 1.0) || !n.is_finite() {
            return Err(Error::invalid(format!("intensity n must exceed 1, got {n}")));
        }
        Ok(ModelParams { d, alpha, n, radius: Self::radius_for(d, n), poissonized: true })
    }

    pub fn radius_for(d: usize, n: f64) -> f64 {
        2.0 / (d as f64 - 1.0) * n.ln()
    }

    /// Switches between a Poisson(n) vertex count and a fixed count of `round(n)`.
    pub fn with_poissonized(mut self, poissonized: bool) -> Self {
        self.poissonized = poissonized;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// The ball radius `R_n`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn poissonized(&self) -> bool {
        self.poissonized
    }

    /// `ω_n = ln ln R_n`; requires `R_n > e` so that the threshold is positive.
    pub fn omega(&self) -> Result<f64> {
        if self.radius <= std::f64::consts::E {
            return Err(Error::domain(format!(
                "omega_n requires R_n > e, got R_n = {}",
                self.radius
            )));
        }
        Ok(self.radius.ln().ln())
    }

    pub fn angle_dim(&self) -> usize {
        self.d - 1
    }
}

/// A vertex in polar form: depth from the boundary plus `d - 1` angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub u: f64,
    pub angles: Vec<f64>,
}

impl PolarPoint {
    pub fn new(u: f64, angles: Vec<f64>) -> Self {
        PolarPoint { u, angles }
    }

    /// The point at depth `u` in the reference direction (all angles zero).
    pub fn anchor(u: f64, params: &ModelParams) -> Self {
        PolarPoint { u, angles: vec![0.0; params.angle_dim()] }
    }

    /// Hyperbolic radius `r = R_n - u`.
    pub fn radius(&self, params: &ModelParams) -> f64 {
        params.radius() - self.u
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.u.is_nan() || self.angles.iter().any(|a| a.is_nan()) {
            return Err(Error::domain("NaN coordinate"));
        }
        if self.u < 0.0 || self.u > params.radius() {
            return Err(Error::domain(format!(
                "depth {} outside [0, {}]",
                self.u,
                params.radius()
            )));
        }
        if self.angles.len() != params.angle_dim() {
            return Err(Error::domain(format!(
                "expected {} angles, got {}",
                params.angle_dim(),
                self.angles.len()
            )));
        }
        let last = self.angles.len() - 1;
        for (i, &a) in self.angles.iter().enumerate() {
            let ok = if i == last { (0.0..TAU).contains(&a) } else { (0.0..=PI).contains(&a) };
            if !ok {
                return Err(Error::domain(format!("angle {i} = {a} out of range")));
            }
        }
        Ok(())
    }

    /// Cartesian unit direction on `S^{d-1}`.
    pub fn direction(&self) -> Vec<f64> {
        unit_vector(&self.angles)
    }
}

/// Maps hyperspherical angles `(θ_1, ..., θ_{d-1})` to a unit vector in `R^d`.
pub fn unit_vector(angles: &[f64]) -> Vec<f64> {
    let d = angles.len() + 1;
    let mut out = Vec::with_capacity(d);
    let mut sin_prod = 1.0;
    for (i, &a) in angles.iter().enumerate() {
        if i + 1 == angles.len() {
            out.push(sin_prod * a.cos());
            out.push(sin_prod * a.sin());
        } else {
            out.push(sin_prod * a.cos());
            sin_prod *= a.sin();
        }
    }
    out
}

/// Inverse of [`unit_vector`] for any nonzero vector; the vector need not be normalized.
pub fn angles_of(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    debug_assert!(d >= 2);
    let mut angles = Vec::with_capacity(d - 1);
    // tail[i] = |(v_i, ..., v_{d-1})|
    let mut tail = vec![0.0f64; d + 1];
    for i in (0..d).rev() {
        tail[i] = tail[i + 1].hypot(v[i]);
    }
    for i in 0..d - 2 {
        angles.push(if tail[i] > 0.0 { tail[i + 1].atan2(v[i]) } else { 0.0 });
    }
    let mut last = v[d - 1].atan2(v[d - 2]);
    if last < 0.0 {
        last += TAU;
    }
    if last >= TAU {
        last = 0.0;
    }
    angles.push(last);
    angles
}

/// `sin²(θ/2)` for the relative angle between two directions.
pub fn half_angle_sin_sq(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        let s = (0.5 * (a[0] - b[0])).sin();
        return s * s;
    }
    let ua = unit_vector(a);
    let ub = unit_vector(b);
    chord_sq(&ua, &ub) * 0.25
}

fn chord_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Relative angle in `[0, π]` between two angle vectors.
pub fn relative_angle(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        let diff = (a[0] - b[0]).abs() % TAU;
        return diff.min(TAU - diff);
    }
    let ua = unit_vector(a);
    let ub = unit_vector(b);
    relative_angle_of_units(&ua, &ub)
}

/// Angle between two unit vectors, via `2 atan2(|x - y|, |x + y|)`.
pub fn relative_angle_of_units(x: &[f64], y: &[f64]) -> f64 {
    let minus = chord_sq(x, y).sqrt();
    let plus: f64 = x.iter().zip(y).map(|(p, q)| (p + q) * (p + q)).sum::<f64>().sqrt();
    2.0 * minus.atan2(plus)
}

/// Hyperbolic distance between points at hyperbolic radii `r1`, `r2` whose
/// relative angle satisfies `sin²(θ/2) = half_sin_sq`.
#[inline]
pub fn distance_from_radii(r1: f64, r2: f64, half_sin_sq: f64) -> f64 {
    let s = (0.5 * (r1 - r2)).sinh();
    let arg = s * s + r1.sinh() * r2.sinh() * half_sin_sq;
    2.0 * arg.sqrt().asinh()
}

/// Same as [`distance_from_radii`] with `sinh r1`, `sinh r2` precomputed.
#[inline]
pub(crate) fn distance_from_parts(r1: f64, r2: f64, sinh1: f64, sinh2: f64, half_sin_sq: f64) -> f64 {
    let s = (0.5 * (r1 - r2)).sinh();
    let arg = s * s + sinh1 * sinh2 * half_sin_sq;
    2.0 * arg.sqrt().asinh()
}

/// Hyperbolic distance `d_H(p, q)`.
pub fn hyperbolic_distance(p: &PolarPoint, q: &PolarPoint, params: &ModelParams) -> Result<f64> {
    if p.u.is_nan() || q.u.is_nan() || p.angles.iter().chain(&q.angles).any(|a| a.is_nan()) {
        return Err(Error::domain("NaN coordinate"));
    }
    if p.angles.len() != params.angle_dim() || q.angles.len() != params.angle_dim() {
        return Err(Error::domain("angle vector length does not match dimension"));
    }
    let r1 = p.radius(params);
    let r2 = q.radius(params);
    Ok(distance_from_radii(r1, r2, half_angle_sin_sq(&p.angles, &q.angles)))
}

/// Result of the large-radius distance approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceApprox {
    pub value: f64,
    /// True iff `t1 + t2 <= R_n - ω_n` and `θ̂ / θ <= 0.1`.
    pub valid: bool,
    /// `θ̂ = (e^{-2(R_n - t1)} + e^{-2(R_n - t2)})^{1/2}`.
    pub theta_hat: f64,
}

/// `2 R_n - (t1 + t2) + 2 ln sin(θ/2)`, the asymptotic distance between two
/// points at depths `t1`, `t2` and relative angle `θ`.
pub fn distance_approximation(t1: f64, t2: f64, theta: f64, params: &ModelParams) -> Result<DistanceApprox> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::domain(format!("relative angle must lie in (0, pi], got {theta}")));
    }
    let r = params.radius();
    let omega = params.omega()?;
    let value = 2.0 * r - (t1 + t2) + 2.0 * (0.5 * theta).sin().ln();
    let theta_hat = ((-2.0 * (r - t1)).exp() + (-2.0 * (r - t2)).exp()).sqrt();
    let valid = t1 + t2 <= r - omega && theta_hat / theta <= 0.1;
    Ok(DistanceApprox { value, valid, theta_hat })
}

/// Largest relative angle at which points of depths `u1`, `u2` are within
/// distance `R_n`; `π` when `r1 + r2 <= R_n`.
pub fn max_connection_angle(u1: f64, u2: f64, params: &ModelParams) -> f64 {
    let big_r = params.radius();
    let r1 = big_r - u1;
    let r2 = big_r - u2;
    max_connection_angle_radii(r1, r2, big_r)
}

pub(crate) fn max_connection_angle_radii(r1: f64, r2: f64, big_r: f64) -> f64 {
    if r1 + r2 <= big_r {
        return PI;
    }
    // sin²(θ*/2) = (sinh²(R/2) - sinh²((r1 - r2)/2)) / (sinh r1 sinh r2),
    // equivalent to cos θ* = (cosh r1 cosh r2 - cosh R) / (sinh r1 sinh r2).
    let sr = (0.5 * big_r).sinh();
    let sd = (0.5 * (r1 - r2)).sinh();
    let x = (sr * sr - sd * sd) / (r1.sinh() * r2.sinh());
    let x = x.clamp(0.0, 1.0);
    2.0 * x.sqrt().asin()
}
