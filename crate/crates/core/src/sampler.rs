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

//! Poisson point process on `B(o, R_n)` with the model's radial and angular laws.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{angles_of, ModelParams, PolarPoint};
use crate::quad;
use crate::rng::substream_rng;

const TABLE_CELLS: usize = 2048;
const CDF_BRACKET: f64 = 1e-12;

/// Radial law of the depth `u`, density proportional to `sinh^{d-1}(α(R_n - u))`.
///
/// Internally the unnormalized density is rescaled by `e^{-α(d-1)R_n}`, i.e.
/// `g(t) = ((e^{-αt} - e^{-α(2R_n - t)}) / 2)^{d-1}`, so large radii never overflow.
#[derive(Debug, Clone)]
pub struct RadialLaw {
    alpha: f64,
    radius: f64,
    dim: i32,
    kind: LawKind,
}

#[derive(Debug, Clone)]
enum LawKind {
    /// d = 2: closed-form density, CDF and quantile.
    Planar { denom: f64 },
    /// d >= 3: normalizer and a cumulative table on an equispaced grid.
    Tabulated { total: f64, step: f64, cumulative: Vec<f64> },
}

impl RadialLaw {
    pub fn new(params: &ModelParams) -> Self {
        let alpha = params.alpha();
        let radius = params.radius();
        let dim = (params.d() - 1) as i32;
        if params.d() == 2 {
            let denom = (-(-alpha * radius).exp_m1()).powi(2);
            return RadialLaw { alpha, radius, dim, kind: LawKind::Planar { denom } };
        }
        let mut law = RadialLaw {
            alpha,
            radius,
            dim,
            kind: LawKind::Tabulated { total: 1.0, step: 0.0, cumulative: Vec::new() },
        };
        let step = radius / TABLE_CELLS as f64;
        let mut cumulative = Vec::with_capacity(TABLE_CELLS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for j in 0..TABLE_CELLS {
            let a = j as f64 * step;
            acc += quad::integrate(|t| law.scaled(t), a, a + step, 1e-13, 0.0);
            cumulative.push(acc);
        }
        // independent adaptive evaluation of the normalizer
        let total = quad::integrate(|t| law.scaled(t), 0.0, radius, 1e-12, 0.0);
        law.kind = LawKind::Tabulated { total, step, cumulative };
        law
    }

    fn scaled(&self, t: f64) -> f64 {
        let a = self.alpha;
        (0.5 * ((-a * t).exp() - (-a * (2.0 * self.radius - t)).exp())).powi(self.dim)
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.radius).contains(&t) {
            return Err(Error::domain(format!("depth {t} outside [0, {}]", self.radius)));
        }
        Ok(match &self.kind {
            LawKind::Planar { denom } => {
                let a = self.alpha;
                a * ((-a * t).exp() - (-a * (2.0 * self.radius - t)).exp()) / denom
            }
            LawKind::Tabulated { total, .. } => self.scaled(t) / total,
        })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.radius);
        match &self.kind {
            LawKind::Planar { denom } => {
                // (cosh αR - cosh α(R - t)) / (cosh αR - 1), rescaled by e^{-αR}
                let a = self.alpha;
                let num = -(-a * t).exp_m1() - (-2.0 * a * self.radius).exp() * (a * t).exp_m1();
                (num / denom).clamp(0.0, 1.0)
            }
            LawKind::Tabulated { total, step, cumulative } => {
                let j = ((t / step) as usize).min(TABLE_CELLS - 1);
                let a = j as f64 * step;
                let part = quad::integrate(|s| self.scaled(s), a, t, 1e-13, 0.0);
                ((cumulative[j] + part) / total).clamp(0.0, 1.0)
            }
        }
    }

    /// The depth `t` with `cdf(t) = q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        match &self.kind {
            LawKind::Planar { denom } => {
                // x = e^{-αt} solves x² - (1 + E - qD) x + E = 0 with E = P², P = e^{-αR}.
                // Since 1 + E - D = 2P, the coefficient and discriminant are
                // formed without cancellation from w = 1 - q.
                let a = self.alpha;
                let p = (-a * self.radius).exp();
                let wd = (1.0 - q) * denom;
                let b = 2.0 * p + wd;
                let disc = wd * (4.0 * p + wd);
                let x = 0.5 * (b + disc.sqrt());
                (-x.ln() / a).clamp(0.0, self.radius)
            }
            LawKind::Tabulated { .. } if q == 0.0 => 0.0,
            LawKind::Tabulated { .. } if q == 1.0 => self.radius,
            LawKind::Tabulated { total, step, cumulative } => {
                let target = q * total;
                // last node with cumulative <= target
                let j = match cumulative.partition_point(|&c| c <= target) {
                    0 => 0,
                    k => (k - 1).min(TABLE_CELLS - 1),
                };
                let mut lo = j as f64 * step;
                let mut hi = ((j + 1) as f64 * step).min(self.radius);
                let mut f_lo = cumulative[j] / total;
                let mut f_hi = cumulative[j + 1] / total;
                while f_hi - f_lo > CDF_BRACKET && hi - lo > f64::EPSILON * hi {
                    let mid = 0.5 * (lo + hi);
                    let f_mid = self.cdf(mid);
                    if f_mid < q {
                        lo = mid;
                        f_lo = f_mid;
                    } else {
                        hi = mid;
                        f_hi = f_mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Density of the depth at `t`.
pub fn radial_density(t: f64, params: &ModelParams) -> Result<f64> {
    RadialLaw::new(params).density(t)
}

pub fn radial_quantile(q: f64, params: &ModelParams) -> f64 {
    RadialLaw::new(params).quantile(q)
}

/// A realization of the point process, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub params: ModelParams,
    pub points: Vec<PolarPoint>,
    pub seed: u64,
    pub replication_id: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the CSV dump: a `#` parameter line, a column header, then one
    /// `u,theta_1,...,theta_{d-1}` row per point at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.params;
        writeln!(
            w,
            "# d={} alpha={:.16e} n={:.16e} poissonized={} R={:.16e} seed={} replication={}",
            p.d(),
            p.alpha(),
            p.n(),
            p.poissonized(),
            p.radius(),
            self.seed,
            self.replication_id
        )?;
        let mut header = String::from("u");
        for i in 1..=p.angle_dim() {
            header.push_str(&format!(",theta_{i}"));
        }
        writeln!(w, "{header}")?;
        for pt in &self.points {
            let mut line = format!("{:.16e}", pt.u);
            for a in &pt.angles {
                line.push_str(&format!(",{a:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let meta = lines.next().ok_or_else(|| Error::Parse("empty cloud file".into()))??;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing parameter line".into()))?;
        let field = |key: &str| -> Result<&str> {
            meta.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
                .ok_or_else(|| Error::Parse(format!("missing `{key}` in parameter line")))
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?.parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}")))
        };
        let d: usize = field("d")?.parse().map_err(|e| Error::Parse(format!("d: {e}")))?;
        let poissonized: bool =
            field("poissonized")?.parse().map_err(|e| Error::Parse(format!("poissonized: {e}")))?;
        let params = ModelParams::new(d, num("alpha")?, num("n")?)?.with_poissonized(poissonized);
        let seed = field("seed")?.parse().map_err(|e| Error::Parse(format!("seed: {e}")))?;
        let replication_id =
            field("replication")?.parse().map_err(|e| Error::Parse(format!("replication: {e}")))?;
        lines.next().ok_or_else(|| Error::Parse("missing column header".into()))??;
        let mut points = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 1)))?;
            if vals.len() != d {
                return Err(Error::Parse(format!("row {}: expected {d} columns", lineno + 1)));
            }
            let pt = PolarPoint::new(vals[0], vals[1..].to_vec());
            pt.validate(&params)?;
            points.push(pt);
        }
        Ok(PointCloud { params, points, seed, replication_id })
    }
}

/// Draws one direction uniformly on `S^{d-1}` as hyperspherical angles.
pub fn sample_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().any(|x: &f64| *x != 0.0) {
            return angles_of(&v);
        }
    }
}

/// Samples the vertex set for replication `replication_id` of `seed`.
pub fn sample_cloud(params: &ModelParams, seed: u64, replication_id: u64) -> PointCloud {
    let law = RadialLaw::new(params);
    sample_cloud_with(&law, params, seed, replication_id)
}

/// As [`sample_cloud`], reusing a prebuilt radial law.
pub fn sample_cloud_with(law: &RadialLaw, params: &ModelParams, seed: u64, replication_id: u64) -> PointCloud {
    let mut rng = substream_rng(seed, replication_id);
    let count = if params.poissonized() {
        Poisson::new(params.n()).expect("intensity is positive").sample(&mut rng) as usize
    } else {
        params.n().round() as usize
    };
    let points = (0..count)
        .map(|_| {
            let u = law.quantile(rng.random::<f64>());
            PolarPoint::new(u, sample_direction(params.d(), &mut rng))
        })
        .collect();
    PointCloud { params: *params, points, seed, replication_id }
}
