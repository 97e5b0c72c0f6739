mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use common::{norm, plane_embed, space_embed, sub};
use hkcone::cone_geometry::{
    cone_distance, cone_distance_sq, lift_geodesic, project_geodesic, radius_lower_bound, rescale_geodesic,
    scaling_identity_residual, spherical_from_cone, ConeGeodesic, ConeMetric, ConePoint, Cutoff, Shape,
};
use hkcone::fixtures::{cap_point, rng};
use hkcone::metric_base::{Metric, Model};
use proptest::prelude::*;
use rand::Rng;

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

fn embed_circle(z: &ConePoint<Vec<f64>>) -> Vec<f64> {
    plane_embed(z.x[0], z.r).to_vec()
}

fn embed_sphere(z: &ConePoint<Vec<f64>>) -> Vec<f64> {
    space_embed(&z.x, z.r).to_vec()
}

#[test]
fn cone_over_the_circle_is_the_plane() {
    let cone = ConeMetric::new(Model::Circle, Cutoff::Pi);
    let mut r = rng(21);
    for _ in 0..500 {
        let a = ConePoint::new(vec![r.gen_range(0.0..2.0 * PI)], r.gen_range(0.0..5.0)).unwrap();
        let b = ConePoint::new(vec![r.gen_range(0.0..2.0 * PI)], r.gen_range(0.0..5.0)).unwrap();
        let oracle = norm(&sub(&embed_circle(&a), &embed_circle(&b)));
        assert!((cone.distance(&a, &b) - oracle).abs() < 1e-12);
    }
}

#[test]
fn cone_over_the_sphere_is_space() {
    let cone = ConeMetric::new(Model::Sphere, Cutoff::Pi);
    let mut r = rng(22);
    for _ in 0..500 {
        let a = ConePoint::new(cap_point(&mut r, PI).to_vec(), r.gen_range(0.0..5.0)).unwrap();
        let b = ConePoint::new(cap_point(&mut r, PI).to_vec(), r.gen_range(0.0..5.0)).unwrap();
        let oracle = norm(&sub(&embed_sphere(&a), &embed_sphere(&b)));
        assert!((cone.distance(&a, &b) - oracle).abs() < 1e-12);
    }
}

#[test]
fn half_pi_cutoff_saturates() {
    assert!((cone_distance_sq(1.0, 2.0, 2.0, Cutoff::HalfPi) - 5.0).abs() < 1e-14);
    assert!((cone_distance_sq(1.0, 2.0, FRAC_PI_2, Cutoff::HalfPi) - 5.0).abs() < 1e-14);
    assert!(cone_distance_sq(1.0, 2.0, 1.0, Cutoff::HalfPi) < 5.0);
    assert_eq!(cone_distance(1.0, 1.0, 7.0, Cutoff::Pi), 2.0);
}

#[test]
fn apex_is_at_radius_distance() {
    let cone = ConeMetric::new(Model::Sphere, Cutoff::Pi);
    let apex = ConePoint::new(vec![0.0, 0.0, 1.0], 0.0).unwrap();
    let z = ConePoint::new(vec![1.0, 0.0, 0.0], 2.5).unwrap();
    assert_eq!(cone.distance(&apex, &z), 2.5);
    let other_apex = ConePoint::new(vec![1.0, 0.0, 0.0], 0.0).unwrap();
    assert_eq!(apex, other_apex);
    assert!(ConePoint::new(vec![0.0], -1.0).is_err());
}

#[test]
fn spherical_distance_is_recovered() {
    for phi in [0.0, 0.3, 1.0, FRAC_PI_2, 2.5, PI, 4.0] {
        let d = cone_distance(1.0, 1.0, phi, Cutoff::Pi);
        assert!((spherical_from_cone(d).unwrap() - phi.min(PI)).abs() < 1e-7);
    }
    assert!(spherical_from_cone(2.1).is_err());
}

#[test]
fn scaling_identity_on_random_tuples() {
    let mut r = rng(23);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (r0, r1) = (r.gen_range(0.0..10.0), r.gen_range(0.0..10.0));
        let phi = r.gen_range(0.0..4.0);
        let (s0, s1) = (r.gen_range(0.0..10.0), r.gen_range(0.0..10.0));
        worst = worst.max(scaling_identity_residual(r0, r1, phi, s0, s1).abs());
    }
    assert!(worst <= 1e-10, "worst residual {worst}");
}

#[test]
fn lifted_circle_geodesic_is_a_chord() {
    let mut r = rng(24);
    for _ in 0..200 {
        let a = r.gen_range(0.0..2.0 * PI);
        let d = r.gen_range(0.01..PI - 0.01) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let base = Model::Circle.geodesic(&[a], &[(a + d).rem_euclid(2.0 * PI)]).unwrap();
        let (r0, r1) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0));
        let g = lift_geodesic(base, r0, r1).unwrap();
        assert_eq!(g.shape(), Shape::Regular);
        let p0 = plane_embed(a, r0);
        let p1 = plane_embed(a + d, r1);
        assert!((g.length() - norm(&sub(&p0, &p1))).abs() < 1e-12);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let err = norm(&sub(&embed_circle(&g.at(t)), &lerp(&p0, &p1, t)));
            assert!(err < 1e-10, "t = {t}: {err}");
        }
    }
}

#[test]
fn lifted_sphere_geodesic_is_a_segment() {
    let mut r = rng(25);
    for _ in 0..200 {
        let x0 = cap_point(&mut r, 1.4).to_vec();
        let x1 = cap_point(&mut r, 1.4).to_vec();
        let base = Model::Sphere.geodesic(&x0, &x1).unwrap();
        let (r0, r1) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0));
        let g = lift_geodesic(base, r0, r1).unwrap();
        let (p0, p1) = (space_embed(&x0, r0), space_embed(&x1, r1));
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert!(norm(&sub(&embed_sphere(&g.at(t)), &lerp(&p0, &p1, t))) < 1e-10);
        }
    }
}

#[test]
fn projection_reparametrizes_the_lift() {
    let mut r = rng(26);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x0 = cap_point(&mut r, 1.4).to_vec();
        let x1 = cap_point(&mut r, 1.4).to_vec();
        let base = Model::Sphere.geodesic(&x0, &x1).unwrap();
        let (r0, r1) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0));
        let g = lift_geodesic(base.clone(), r0, r1).unwrap();
        let proj = project_geodesic(g.clone()).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let via_sigma = g.at(proj.sigma(t));
            let direct = proj.at(t);
            worst = worst.max(norm(&sub(&embed_sphere(&via_sigma), &embed_sphere(&direct))));
            worst = worst.max(Model::Sphere.dist(&direct.x, &base.at(t)));
            worst = worst.max((g.zeta(proj.sigma(t)) - t).abs());
        }
    }
    assert!(worst <= 1e-10, "worst {worst}");
}

#[test]
fn rho_squared_has_constant_second_difference() {
    let mut r = rng(27);
    for _ in 0..200 {
        let x0 = cap_point(&mut r, 1.4).to_vec();
        let x1 = cap_point(&mut r, 1.4).to_vec();
        let base = Model::Sphere.geodesic(&x0, &x1).unwrap();
        let (r0, r1) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0));
        let g = lift_geodesic(base, r0, r1).unwrap();
        let target = 2.0 * g.length() * g.length();
        let h = 0.1;
        for k in 1..10 {
            let t = k as f64 * h;
            let dd = (g.rho_sq(t + h) - 2.0 * g.rho_sq(t) + g.rho_sq(t - h)) / (h * h);
            assert!((dd - target).abs() <= 1e-8 * target.max(1.0), "{dd} vs {target}");
        }
    }
}

#[test]
fn rescaled_geodesic_is_the_scaled_segment() {
    let mut r = rng(28);
    for _ in 0..100 {
        let x0 = cap_point(&mut r, 1.4).to_vec();
        let x1 = cap_point(&mut r, 1.4).to_vec();
        let base = Model::Sphere.geodesic(&x0, &x1).unwrap();
        let (r0, r1) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0));
        let (s0, s1) = (r.gen_range(0.0..3.0), r.gen_range(0.1..3.0));
        let g = lift_geodesic(base, r0, r1).unwrap();
        let h = rescale_geodesic(&g, s0, s1).unwrap();
        let p0: Vec<f64> = space_embed(&x0, r0 * s0).to_vec();
        let p1: Vec<f64> = space_embed(&x1, r1 * s1).to_vec();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert!(norm(&sub(&embed_sphere(&h.at(t)), &lerp(&p0, &p1, t))) < 1e-10);
        }
    }
}

#[test]
fn through_apex_geodesic_is_a_segment_through_the_origin() {
    let base = Model::Circle.geodesic(&[0.0], &[3.0]).unwrap();
    let g = ConeGeodesic::connecting(base, PI, 1.0, 3.0).unwrap();
    assert_eq!(g.shape(), Shape::ThroughApex);
    assert_eq!(g.length(), 4.0);
    let p0 = plane_embed(0.0, 1.0);
    let p1 = plane_embed(PI, 3.0);
    for k in 0..=8 {
        let t = k as f64 / 8.0;
        let z = g.at(t);
        let expected = lerp(&p0, &p1, t);
        assert!((z.r - norm(&expected)).abs() < 1e-14);
    }
}

#[test]
fn radius_bound_matches_sampling() {
    let mut r = rng(29);
    for _ in 0..200 {
        let (r0, r1) = (r.gen_range(0.1..5.0), r.gen_range(0.1..5.0));
        let phi = r.gen_range(0.01..PI - 0.01);
        let p0 = plane_embed(0.0, r0);
        let p1 = plane_embed(phi, r1);
        let f = |t: f64| norm(&lerp(&p0, &p1, t));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let searched = f(0.5 * (lo + hi));
        assert!((radius_lower_bound(r0, r1, phi) - searched).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn cone_triangle_inequality(
        a in 0.0f64..6.28, b in 0.0f64..6.28, c in 0.0f64..6.28,
        ra in 0.0f64..4.0, rb in 0.0f64..4.0, rc in 0.0f64..4.0,
    ) {
        let cone = ConeMetric::new(Model::Circle, Cutoff::Pi);
        let za = ConePoint::new(vec![a], ra).unwrap();
        let zb = ConePoint::new(vec![b], rb).unwrap();
        let zc = ConePoint::new(vec![c], rc).unwrap();
        prop_assert!(cone.distance(&za, &zc) <= cone.distance(&za, &zb) + cone.distance(&zb, &zc) + 1e-12);
    }

    #[test]
    fn cone_distance_is_homogeneous(r0 in 0.0f64..5.0, r1 in 0.0f64..5.0, phi in 0.0f64..4.0, c in 0.0f64..5.0) {
        let lhs = cone_distance(c * r0, c * r1, phi, Cutoff::Pi);
        let rhs = c * cone_distance(r0, r1, phi, Cutoff::Pi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }
}
