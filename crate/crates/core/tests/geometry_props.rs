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

use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrgg_core::geometry::{
    distance_approximation, hyperbolic_distance, max_connection_angle, relative_angle, unit_vector, ModelParams,
    PolarPoint,
};
use hrgg_core::sampler::sample_direction;

fn random_point(params: &ModelParams, rng: &mut ChaCha8Rng) -> PolarPoint {
    let u = rng.random::<f64>() * params.radius();
    PolarPoint::new(u, sample_direction(params.d(), rng))
}

/// `arccosh(cosh r1 cosh r2 - sinh r1 sinh r2 cos θ)`, the textbook form.
fn textbook_distance(r1: f64, r2: f64, theta: f64) -> f64 {
    (r1.cosh() * r2.cosh() - r1.sinh() * r2.sinh() * theta.cos()).max(1.0).acosh()
}

#[test]
fn triangle_inequality_on_random_triples() {
    for d in [2usize, 3, 4] {
        // R_n = 30 / (d - 1)
        let params = ModelParams::new(d, 0.8, (15.0 * (d as f64 - 1.0)).exp()).unwrap();
        assert!(params.radius() <= 30.0 + 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        for _ in 0..10_000 {
            let (a, b, c) = (random_point(&params, &mut rng), random_point(&params, &mut rng), random_point(&params, &mut rng));
            let ab = hyperbolic_distance(&a, &b, &params).unwrap();
            let bc = hyperbolic_distance(&b, &c, &params).unwrap();
            let ac = hyperbolic_distance(&a, &c, &params).unwrap();
            assert!(ac <= ab + bc + 1e-9, "{ac} > {ab} + {bc}");
            assert_eq!(ab, hyperbolic_distance(&b, &a, &params).unwrap());
        }
    }
}

#[test]
fn distance_to_origin_is_the_radius() {
    let params = ModelParams::new(3, 0.8, 1e6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let p = random_point(&params, &mut rng);
        let origin = PolarPoint::new(params.radius(), random_point(&params, &mut rng).angles);
        let d = hyperbolic_distance(&origin, &p, &params).unwrap();
        assert!((d - (params.radius() - p.u)).abs() < 1e-9);
    }
}

#[test]
fn relative_angle_wraps_on_the_circle() {
    assert!((relative_angle(&[0.2], &[6.2]) - (2.0 * PI - 6.0)).abs() < 1e-12);
    assert!((relative_angle(&[0.2], &[6.2]) - 0.28319).abs() < 1e-5);
    assert!((relative_angle(&[0.0, 0.0], &[PI, 0.0]) - PI).abs() < 1e-12);
    assert!((max_connection_angle(6.0, 6.0, &ModelParams::new(2, 0.8, 1000.0).unwrap())
        > max_connection_angle(5.0, 5.0, &ModelParams::new(2, 0.8, 1000.0).unwrap())));
}

#[test]
fn approximation_error_is_quadratic_in_the_angle_ratio() {
    let params = ModelParams::new(2, 0.8, 1e8).unwrap();
    let r = params.radius();
    let mut checked = 0;
    for i in 0..40 {
        for j in 0..40 {
            let (t1, t2) = (i as f64 * 0.5, j as f64 * 0.5);
            for l in 1..=60 {
                let theta = PI * l as f64 / 60.0;
                let approx = distance_approximation(t1, t2, theta, &params).unwrap();
                if !approx.valid {
                    continue;
                }
                let half = (0.5 * theta).sin().powi(2);
                let exact = hrgg_core::geometry::distance_from_radii(r - t1, r - t2, half);
                // plus a rounding floor: both sides are O(R_n) in magnitude
                let bound = 10.0 * (approx.theta_hat / theta).powi(2) + 1e-12;
                assert!((approx.value - exact).abs() < bound, "t1={t1} t2={t2} θ={theta}");
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000);
}

proptest! {
    #[test]
    fn stable_form_matches_textbook_form(r1 in 0.0f64..25.0, r2 in 0.0f64..25.0, theta in 0.0f64..PI) {
        let stable = hrgg_core::geometry::distance_from_radii(r1, r2, (0.5 * theta).sin().powi(2));
        let textbook = textbook_distance(r1, r2, theta);
        // the textbook form loses everything below its own rounding of cosh(d)
        let slack = 1e-9 * textbook.max(1.0) + if textbook < 1e-3 { 1e-4 } else { 0.0 };
        prop_assert!((stable - textbook).abs() <= slack, "{} vs {}", stable, textbook);
    }

    #[test]
    fn edge_rule_agrees_with_max_angle(
        u1 in 0.0f64..13.8,
        u2 in 0.0f64..13.8,
        a1 in 0.0f64..(2.0 * PI),
        a2 in 0.0f64..(2.0 * PI),
        d in 2usize..5,
    ) {
        let params = ModelParams::new(d, 0.8, 1000f64.powf((d - 1) as f64)).unwrap();
        let (u1, u2) = (u1.min(params.radius()), u2.min(params.radius()));
        let mut angles1 = vec![0.5; d - 1];
        let mut angles2 = vec![0.5; d - 1];
        angles1[d - 2] = a1;
        angles2[d - 2] = a2;
        let (p, q) = (PolarPoint::new(u1, angles1), PolarPoint::new(u2, angles2));
        let dist = hyperbolic_distance(&p, &q, &params).unwrap();
        if (dist - params.radius()).abs() > 1e-12 {
            let theta = relative_angle(&p.angles, &q.angles);
            let within_angle = theta <= max_connection_angle(u1, u2, &params);
            prop_assert_eq!(within_angle, dist <= params.radius());
        }
    }

    #[test]
    fn unit_vectors_have_unit_norm(angles in prop::collection::vec(0.0f64..PI, 1..5), last in 0.0f64..(2.0 * PI)) {
        let mut a = angles;
        a.push(last);
        let v = unit_vector(&a);
        prop_assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
