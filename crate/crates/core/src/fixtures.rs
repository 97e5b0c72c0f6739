//! Seeded random spaces and measures for experiments and property suites.
//!
//! Every generator draws from a [`ChaCha8Rng`], so a seed fully determines
//! the output on every platform.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::let_solver::{DiscreteMeasure, LetProblem};
use crate::metric_base::{MetricSpace, SpaceKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` uniform points in `[0, side]^dim`.
pub fn euclidean_cloud<R: Rng>(rng: &mut R, n: usize, dim: usize, side: f64) -> Result<MetricSpace> {
    let pts = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(0.0..side)).collect())
        .collect();
    MetricSpace::euclidean(pts)
}

/// The `n × n` grid with spacing `side / (n − 1)`.
pub fn square_grid(n: usize, side: f64) -> Result<MetricSpace> {
    let h = if n > 1 { side / (n - 1) as f64 } else { 0.0 };
    let pts = (0..n * n)
        .map(|k| vec![(k % n) as f64 * h, (k / n) as f64 * h])
        .collect();
    MetricSpace::euclidean(pts)
}

/// `n` uniform angles on the circle.
pub fn circle_cloud<R: Rng>(rng: &mut R, n: usize) -> Result<MetricSpace> {
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    MetricSpace::circle(&a)
}

/// `n` points uniform on the spherical cap of angular radius `cap` around the north pole.
pub fn sphere_cap<R: Rng>(rng: &mut R, n: usize, cap: f64) -> Result<MetricSpace> {
    let pts: Vec<[f64; 3]> = (0..n).map(|_| cap_point(rng, cap)).collect();
    MetricSpace::sphere(&pts)
}

/// One uniform point on the cap of angular radius `cap` around the north pole.
pub fn cap_point<R: Rng>(rng: &mut R, cap: f64) -> [f64; 3] {
    let z = rng.gen_range(cap.cos()..=1.0);
    let az = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * az.cos(), s * az.sin(), z]
}

/// A random connected graph: a random spanning tree plus `extra` edges,
/// lengths uniform in `[0.1, 1]`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Result<MetricSpace> {
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.1..1.0)));
    }
    for _ in 0..extra {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v {
            edges.push((u, v, rng.gen_range(0.1..1.0)));
        }
    }
    MetricSpace::graph(n, &edges)
}

/// A random space of the given kind with `n` points, scaled to diameter about `scale`.
pub fn random_space<R: Rng>(rng: &mut R, kind: SpaceKind, n: usize, scale: f64) -> Result<MetricSpace> {
    match kind {
        SpaceKind::Euclidean => euclidean_cloud(rng, n, 2, scale / 2f64.sqrt()),
        SpaceKind::Circle => circle_cloud(rng, n),
        SpaceKind::Sphere => sphere_cap(rng, n, (scale / 2.0).min(PI / 2.0)),
        SpaceKind::Graph => random_graph(rng, n, n / 2),
        SpaceKind::Matrix => {
            let g = random_graph(rng, n, n)?;
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| g.d(i, j)).collect()).collect();
            MetricSpace::from_matrix(&rows)
        }
    }
}

/// `k` distinct atoms of `space_len` points with weights uniform in `[lo, hi]`.
pub fn random_measure<R: Rng>(rng: &mut R, space_len: usize, k: usize, lo: f64, hi: f64) -> DiscreteMeasure {
    let k = k.min(space_len);
    let mut support = sample(rng, space_len, k).into_vec();
    support.sort_unstable();
    let weights = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
    DiscreteMeasure { support, weights }
}

/// A random probability measure with `k` atoms.
pub fn random_probability<R: Rng>(rng: &mut R, space_len: usize, k: usize) -> DiscreteMeasure {
    random_measure(rng, space_len, k, 0.1, 1.0)
        .normalized()
        .expect("positive weights")
}

/// A random LET problem on a fresh Euclidean space of `n` points in the
/// unit square, with measures of up to `k0`, `k1` atoms.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, k0: usize, k1: usize, delta: f64) -> Result<LetProblem> {
    let space = Arc::new(euclidean_cloud(rng, n, 2, 1.0)?);
    let mu0 = random_measure(rng, n, k0, 0.1, 1.0);
    let mu1 = random_measure(rng, n, k1, 0.1, 1.0);
    LetProblem::new(space, mu0, mu1, delta)
}

/// Uniform weight `w` on every point of the space.
pub fn uniform(space_len: usize, w: f64) -> DiscreteMeasure {
    DiscreteMeasure {
        support: (0..space_len).collect(),
        weights: vec![w; space_len],
    }
}

/// Multiplies every weight of `reference` by a factor uniform in `[lo, hi]`.
pub fn perturbed<R: Rng>(rng: &mut R, reference: &DiscreteMeasure, lo: f64, hi: f64) -> DiscreteMeasure {
    DiscreteMeasure {
        support: reference.support.clone(),
        weights: reference
            .weights
            .iter()
            .map(|w| w * rng.gen_range(lo..=hi))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible() {
        let a = random_problem(&mut rng(7), 10, 4, 3, 1.0).unwrap();
        let b = random_problem(&mut rng(7), 10, 4, 3, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_kind_builds() {
        let mut r = rng(1);
        for kind in [
            SpaceKind::Euclidean,
            SpaceKind::Circle,
            SpaceKind::Sphere,
            SpaceKind::Graph,
            SpaceKind::Matrix,
        ] {
            let s = random_space(&mut r, kind, 12, 1.0).unwrap();
            assert_eq!(s.len(), 12);
            assert!(s.triangle_violation().0 <= 1e-12);
        }
    }
}
