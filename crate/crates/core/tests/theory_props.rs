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

use proptest::prelude::*;

use hrgg_core::quad::integrate;
use hrgg_core::theory::{
    ell, ell_closed_form_m3, ell_monte_carlo, frechet_fidi_cdf, stable_cf, star_scaling, StableKind,
    DEFAULT_ELL_BUDGET,
};
use hrgg_core::ModelParams;

/// Area of `{|x| <= a, |y| <= b, |x - y| <= c}`.
fn band_area(a: f64, b: f64, c: f64) -> f64 {
    // area of the part of the rectangle with x - y > c; the other side is symmetric
    let g = |z: f64| {
        if z <= 0.0 {
            0.0
        } else if z <= 2.0 * a {
            0.5 * z * z
        } else {
            2.0 * a * a + 2.0 * a * (z - 2.0 * a)
        }
    };
    let above = g(a - c + b) - g(a - c - b);
    4.0 * a * b - 2.0 * above
}

/// Inner `t_3` integral of the `m = 4`, `d = 2` integrand, split where the
/// band area changes its algebraic form so every piece is smooth.
fn inner_t3(t1: f64, t2: f64, u: f64, alpha: f64) -> f64 {
    let a = 2.0 * (0.5 * (t1 + t2)).exp();
    let (h1, h2) = ((0.5 * t1).exp(), (0.5 * t2).exp());
    // with E = e^{t3/2}: a - c + b = a - 2(h2 - h1)E and a - c - b = a - 2(h1 + h2)E
    let mut cuts = vec![t2, u];
    for e in [a / (2.0 * (h2 - h1)), a / (2.0 * (h1 + h2))] {
        let t = 2.0 * e.ln();
        if e.is_finite() && t > t2 && t < u {
            cuts.push(t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let f = |t3: f64| {
        let b = 2.0 * (0.5 * (t1 + t3)).exp();
        let c = 2.0 * (0.5 * (t2 + t3)).exp();
        (0.5 * (1.0 - 2.0 * alpha) * t1 - alpha * (t2 + t3)).exp() * band_area(a, b, c)
    };
    cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-11, 0.0)).sum()
}

/// `ℓ(u)` for `d = 2`, `m = 4` straight from its definition: an ordered
/// triple integral with the exact area of the admissible `(w_2, w_3)` set.
fn ell_m4_planar(u: f64, alpha: f64) -> f64 {
    integrate(|t1| integrate(|t2| inner_t3(t1, t2, u, alpha), t1, u, 1e-9, 0.0), 0.0, u, 1e-8, 0.0)
}

#[test]
fn band_area_limits() {
    // no band constraint
    assert!((band_area(1.0, 2.0, 10.0) - 8.0).abs() < 1e-12);
    // unit square [-1/2, 1/2]^2 with |x - y| <= 1/2 keeps 3/4 of it
    assert!((band_area(0.5, 0.5, 0.5) - 0.75).abs() < 1e-12);
}

#[test]
fn ell_m4_monte_carlo_matches_quadrature() {
    let params = ModelParams::new(2, 0.9, 1e4).unwrap();
    for u in [2.0, 6.0, 15.0] {
        let oracle = ell_m4_planar(u, 0.9);
        let mc = ell_monte_carlo(u, &params, 4, 2_000_000, 17).unwrap();
        assert!(
            (mc.value - oracle).abs() < 4.0 * mc.std_error + 1e-6 * oracle,
            "u = {u}: {mc:?} vs {oracle}"
        );
    }
}

#[test]
fn ell_infinity_m3_monte_carlo_within_half_percent() {
    let params = ModelParams::new(2, 0.8, 1e4).unwrap();
    let exact = ell_closed_form_m3(f64::INFINITY, &params).unwrap().value;
    assert!((exact - 133.333_333_333).abs() < 1e-6);
    let mc = ell_monte_carlo(f64::INFINITY, &params, 3, DEFAULT_ELL_BUDGET, 99).unwrap();
    assert!((mc.value / exact - 1.0).abs() < 0.005, "{mc:?}");
    assert_eq!(ell(0.0, &params, 4, 1000).unwrap().value, 0.0);
}

#[test]
fn star_scaling_grows_by_the_exact_power() {
    for (alpha, k) in [(0.8, 2usize), (1.5, 3), (0.7, 4)] {
        let a1 = star_scaling(&ModelParams::new(2, alpha, 1e4).unwrap(), k).unwrap().a_kn;
        let a4 = star_scaling(&ModelParams::new(2, alpha, 4e4).unwrap(), k).unwrap().a_kn;
        let expect = 4f64.powf((k - 1) as f64 / (2.0 * alpha));
        assert!((a4 / a1 / expect - 1.0).abs() < 1e-13);
    }
}

proptest! {
    #[test]
    fn single_time_frechet_is_exponential(t in 0.01f64..10.0, z in 0.01f64..50.0, beta in 0.1f64..3.0) {
        let got = frechet_fidi_cdf(&[t], &[z], beta).unwrap();
        prop_assert_eq!(got, (-t * z.powf(-beta)).exp());
    }

    #[test]
    fn stable_cf_is_bounded_and_conjugate_symmetric(v in 0.01f64..20.0, beta in 1.05f64..1.95, sub in 0.05f64..0.95) {
        for (b, kind) in [(beta, StableKind::Centered), (sub, StableKind::Subordinator)] {
            let plus = stable_cf(v, 1.0, b, kind).unwrap();
            let minus = stable_cf(-v, 1.0, b, kind).unwrap();
            prop_assert!(plus.norm() <= 1.0 + 1e-12);
            prop_assert!((plus - minus.conj()).norm() < 1e-9);
        }
    }
}
