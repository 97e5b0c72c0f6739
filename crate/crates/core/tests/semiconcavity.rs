use std::f64::consts::{FRAC_PI_4, PI};

use hkcone::cone_geometry::{lift_geodesic, ConeMetric, ConePoint, Cutoff};
use hkcone::fixtures::{cap_point, rng};
use hkcone::metric_base::Model;
use hkcone::semiconcavity::{
    cone_transfer_a, cone_transfer_b, estimate_k, estimate_k_from_samples, m_constant, sine_interpolation_margin,
    sine_series_constant, sine_series_partial, transfer_f1_to_f2, transfer_f2_to_f1, TransferConstants, Variant,
};
use proptest::prelude::*;
use rand::Rng;

/// `Σ n x^{2n} / (2n+1)! = (cosh x − sinh x / x) / 2`.
fn series_closed_form() -> f64 {
    2.0 * (PI.cosh() - PI.sinh() / PI) / (PI * PI)
}

#[test]
fn series_constant_has_a_closed_form() {
    assert!((sine_series_constant() - series_closed_form()).abs() < 1e-14);
}

#[test]
fn partial_sums_increase_to_the_constant() {
    assert!((sine_series_partial(1) - 4.0 / 6.0).abs() < 1e-15);
    assert!((sine_series_partial(2) - (4.0 / 6.0 + 8.0 * PI * PI / 120.0)).abs() < 1e-15);
    let mut prev = 0.0;
    for n in 1..30 {
        let s = sine_series_partial(n);
        assert!(s >= prev);
        prev = s;
    }
    assert_eq!(prev, sine_series_constant());
    assert_eq!(sine_series_partial(0), 0.0);
}

#[test]
fn sine_interpolation_inequality_on_a_grid() {
    let mut worst = f64::INFINITY;
    for i in 0..100 {
        for j in 0..100 {
            worst = worst.min(sine_interpolation_margin(i as f64 / 99.0, PI * j as f64 / 99.0));
        }
    }
    assert!(worst >= -1e-12, "worst margin {worst}");
}

#[test]
fn flat_squared_distance_has_no_excess() {
    let mut r = rng(41);
    for _ in 0..50 {
        let mut pt = || vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        let (x0, x1, x2) = (pt(), pt(), pt());
        let g = Model::Euclidean.geodesic(&x0, &x1).unwrap();
        let rep = estimate_k(&Model::Euclidean, &g, &x2, Variant::F2, 33).unwrap();
        assert!(rep.excess().abs() <= 1e-9, "excess {}", rep.excess());
    }
}

#[test]
fn sphere_f1_constant_is_bounded_by_half_the_cosine() {
    let mut r = rng(42);
    for _ in 0..50 {
        let (x0, x1, x2) = (cap_point(&mut r, 1.0), cap_point(&mut r, 1.0), cap_point(&mut r, 1.2));
        let g = Model::Sphere.geodesic(&x0, &x1).unwrap();
        if g.length() < 1e-3 {
            continue;
        }
        let rep = estimate_k(&Model::Sphere, &g, &x2.to_vec(), Variant::F1, 33).unwrap();
        let cosines: Vec<f64> = (0..=200)
            .map(|k| Model::Sphere.dist(&x2, &g.at(k as f64 / 200.0)).cos())
            .collect();
        let hi = cosines.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = cosines.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(rep.k <= 0.5 * hi + 1e-9 && rep.k >= 0.5 * lo - 1e-9, "{} not in [{lo}/2, {hi}/2]", rep.k);
    }
}

#[test]
fn positive_curvature_makes_squared_distance_more_concave() {
    let mut r = rng(43);
    for _ in 0..50 {
        let (x0, x1, x2) = (cap_point(&mut r, 1.0), cap_point(&mut r, 1.0), cap_point(&mut r, 1.0));
        let g = Model::Sphere.geodesic(&x0, &x1).unwrap();
        if g.length() < 1e-3 {
            continue;
        }
        let rep = estimate_k(&Model::Sphere, &g, &x2.to_vec(), Variant::F2, 33).unwrap();
        assert!(rep.k <= 1.0 + 1e-9);
    }
}

#[test]
fn cone_over_the_sphere_is_flat_and_within_the_transfer_bound() {
    let mut r = rng(44);
    let cone = ConeMetric::new(Model::Sphere, Cutoff::Pi);
    for _ in 0..10 {
        let radius = r.gen_range(0.2..0.6);
        let (x0, x1, x2) = (cap_point(&mut r, radius), cap_point(&mut r, radius), cap_point(&mut r, radius));
        let (r0, r1, r2) = (r.gen_range(0.5..2.0), r.gen_range(0.5..2.0), r.gen_range(0.5..2.0));
        let base = Model::Sphere.geodesic(&x0, &x1).unwrap();
        let k_base = estimate_k(&Model::Sphere, &base, &x2.to_vec(), Variant::F1, 33).unwrap().k;
        let lifted = lift_geodesic(base, r0, r1).unwrap();
        let observer = ConePoint::new(x2.to_vec(), r2).unwrap();
        let k_cone = estimate_k(&cone, &lifted, &observer, Variant::F2, 33).unwrap().k;
        assert!((k_cone - 1.0).abs() < 1e-8, "cone constant {k_cone}");
        assert!(k_cone <= cone_transfer_a(k_base.max(1e-12), r0, r1, r2, radius).unwrap());
    }
}

#[test]
fn parabola_samples() {
    let n = 17;
    let h = 1.0 / (n - 1) as f64;
    let f: Vec<f64> = (0..n).map(|i| 3.0 * (i as f64 * h).powi(2)).collect();
    let rep = estimate_k_from_samples(&f, |i, j| ((j - i) as f64 * h).powi(2)).unwrap();
    assert!((rep.k - 3.0).abs() < 1e-12);
    assert!((rep.base_distance - 1.0).abs() < 1e-15);
    assert!(estimate_k_from_samples(&f[..2], |_, _| 1.0).is_err());
}

#[test]
fn transfer_examples() {
    assert_eq!(m_constant(0.0).unwrap(), 1.0);
    assert!((m_constant(FRAC_PI_4).unwrap() - PI / 2.0).abs() < 1e-15);
    assert!(m_constant(PI / 2.0).is_err());
    assert_eq!(transfer_f2_to_f1(1.0, 2.0).unwrap(), 8.0);
    assert!((transfer_f1_to_f2(1.0, 0.0, 1.0).unwrap() - (1.0 + 2.0 / PI)).abs() < 1e-15);
    assert!(transfer_f1_to_f2(0.0, 0.0, 1.0).is_err());
    let tc = TransferConstants::new(0.3, 1.0, 1.0).unwrap();
    assert!((tc.r_min - 0.3f64.cos()).abs() < 1e-12);
    assert!(cone_transfer_b(1.0, 1.0, 2.0, 1.0, 0.3).is_err());
    let b = cone_transfer_b(1.0, 1.0, 1.0, 1.0, 0.3).unwrap();
    assert!((b - 2.0 * sine_series_constant() * m_constant(0.3).unwrap()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn cone_transfer_grows_with_the_base_constant(
        k in 0.01f64..5.0, dk in 0.0f64..5.0,
        r0 in 0.2f64..3.0, r1 in 0.2f64..3.0, r2 in 0.2f64..3.0, radius in 0.0f64..1.5,
    ) {
        let a = cone_transfer_a(k, r0, r1, r2, radius).unwrap();
        let b = cone_transfer_a(k + dk, r0, r1, r2, radius).unwrap();
        prop_assert!(a > 1.0);
        prop_assert!(b >= a);
    }

    #[test]
    fn margin_is_nonnegative(t in 0.0f64..=1.0, x in 0.0f64..=PI) {
        prop_assert!(sine_interpolation_margin(t, x) >= -1e-12);
    }
}
