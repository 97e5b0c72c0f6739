//! Doubling diagnostics and density-bounded classes of measures.
//!
//! A reference measure `𝓛` with full support on the finite space defines two
//! classes:
//!
//! * `M̄_δ`: measures with `δ ≤ dμ/d𝓛 ≤ 1/δ` at every point;
//! * `M̃_{d1,d2}`: measures with `d2 ≤ μ(B(x, d1)) / 𝓛(B(x, d1)) ≤ 1/d2`
//!   for every point `x` of the space.
//!
//! Balls are open. Doubling constants are measured on the finite space, so
//! every bound evaluated here uses measured constants in place of the
//! abstract ones.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hk_space::{geodesic_from_solution, joint_problem, project_geodesic_to_sphere, shk_from_hk2, PointMeasure};
use crate::let_solver::{cos2_cut, solve_let, DiscreteMeasure, LetProblem, LetSolution};
use crate::metric_base::MetricSpace;
use crate::semiconcavity::{estimate_k_from_samples, SemiconcReport};

/// `μ(B(x_center, r))`.
pub fn ball_mass(space: &MetricSpace, mu: &DiscreteMeasure, center: usize, r: f64) -> f64 {
    mu.support
        .iter()
        .zip(&mu.weights)
        .filter(|(&s, _)| space.d(center, s) < r)
        .map(|(_, w)| w)
        .sum()
}

/// `μ(B(x_center, r))` for a measure on model coordinates.
pub fn point_ball_mass(space: &MetricSpace, mu: &PointMeasure, center: usize, r: f64) -> Result<f64> {
    let mut m = 0.0;
    for (p, w) in mu.points.iter().zip(&mu.weights) {
        if space.distance_to(center, p)? < r {
            m += w;
        }
    }
    Ok(m)
}

fn check_reference(space: &MetricSpace, reference: &DiscreteMeasure) -> Result<()> {
    reference.validate(space)?;
    if reference.len() != space.len() {
        return invalid(format!(
            "reference measure charges {} of {} points; it needs full support",
            reference.len(),
            space.len()
        ));
    }
    Ok(())
}

// reference weight per space point
fn reference_density(space: &MetricSpace, reference: &DiscreteMeasure) -> Vec<f64> {
    let mut w = vec![0.0; space.len()];
    for (&s, &x) in reference.support.iter().zip(&reference.weights) {
        w[s] = x;
    }
    w
}

/// Number of `d1`-balls, centred at points of the space, that the greedy
/// net covering uses for `B(x, d2)`, starting from `x` itself.
pub fn greedy_cover(space: &MetricSpace, center: usize, d1: f64, d2: f64) -> usize {
    let mut uncovered = space.ball(center, d2);
    uncovered.retain(|&y| space.d(center, y) >= d1);
    let mut count = 1;
    while let Some(&c) = uncovered.first() {
        uncovered.retain(|&y| space.d(c, y) >= d1);
        count += 1;
    }
    count
}

/// Measured constants for one pair of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingEntry {
    pub d1: f64,
    pub d2: f64,
    /// Largest greedy covering number of a `d2`-ball by `d1`-balls.
    pub covering: usize,
    /// Largest `𝓛(B(x, d2)) / 𝓛(B(x, d1))`.
    pub measure: f64,
    /// Centre attaining `measure`.
    pub worst_center: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub entries: Vec<DoublingEntry>,
    /// Largest outer scale tested.
    pub max_scale: f64,
}

impl DoublingReport {
    pub fn max_covering(&self) -> usize {
        self.entries.iter().map(|e| e.covering).max().unwrap_or(1)
    }

    pub fn max_measure(&self) -> f64 {
        self.entries.iter().map(|e| e.measure).fold(1.0, f64::max)
    }
}

pub fn doubling_constants(
    space: &MetricSpace,
    reference: &DiscreteMeasure,
    scales: &[(f64, f64)],
) -> Result<DoublingReport> {
    check_reference(space, reference)?;
    let w = reference_density(space, reference);
    let ball = |x: usize, r: f64| -> f64 { space.ball(x, r).iter().map(|&y| w[y]).sum() };
    let mut entries = Vec::with_capacity(scales.len());
    for &(d1, d2) in scales {
        if !(d1 > 0.0 && d2 >= d1) {
            return invalid(format!("scales ({d1}, {d2}) need 0 < d1 ≤ d2"));
        }
        let mut e = DoublingEntry {
            d1,
            d2,
            covering: 1,
            measure: 1.0,
            worst_center: 0,
        };
        for x in 0..space.len() {
            let inner = ball(x, d1);
            if !(inner > 0.0) {
                return Err(Error::Degenerate(format!("ball of radius {d1} at point {x} is empty")));
            }
            let ratio = ball(x, d2) / inner;
            if ratio > e.measure {
                e.measure = ratio;
                e.worst_center = x;
            }
            e.covering = e.covering.max(greedy_cover(space, x, d1, d2));
        }
        entries.push(e);
    }
    Ok(DoublingReport {
        max_scale: scales.iter().map(|s| s.1).fold(0.0, f64::max),
        entries,
    })
}

/// Scale pairs with the given ratio: inner radii `base · 2^k`, `k = −4..`,
/// while the outer radius stays at most `max_scale`.
pub fn ratio_scales(base: f64, ratio: f64, max_scale: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut d1 = base / 16.0;
    while d1 * ratio <= max_scale * (1.0 + 1e-12) && out.len() < 16 {
        out.push((d1, d1 * ratio));
        d1 *= 2.0;
    }
    if out.is_empty() {
        out.push((base, base * ratio));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum MeasureClass {
    /// Pointwise density in `[delta, 1/delta]`.
    Bounded { delta: f64 },
    /// Ball ratios at radius `d1` in `[d2, 1/d2]`.
    Ball { d1: f64, d2: f64 },
}

impl MeasureClass {
    fn bracket(&self) -> (f64, f64) {
        match *self {
            MeasureClass::Bounded { delta } => (delta, 1.0 / delta),
            MeasureClass::Ball { d2, .. } => (d2, 1.0 / d2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMembership {
    pub class: MeasureClass,
    pub member: bool,
    /// Extremes of the tested ratios.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Point where the ratio leaves the bracket farthest, if it does.
    pub witness: Option<usize>,
}

fn verdict(class: MeasureClass, ratios: &[f64]) -> ClassMembership {
    let (lo, hi) = class.bracket();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut witness = None;
    let mut worst = 0.0;
    for (x, &r) in ratios.iter().enumerate() {
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
        let miss = if r < lo { lo / r.max(1e-300) } else if r > hi { r / hi } else { 0.0 };
        if miss > worst {
            worst = miss;
            witness = Some(x);
        }
    }
    ClassMembership {
        class,
        member: witness.is_none(),
        min_ratio,
        max_ratio,
        witness,
    }
}

pub fn class_membership(
    space: &MetricSpace,
    mu: &DiscreteMeasure,
    reference: &DiscreteMeasure,
    class: MeasureClass,
) -> Result<ClassMembership> {
    check_reference(space, reference)?;
    mu.validate(space)?;
    let w = reference_density(space, reference);
    let ratios: Vec<f64> = match class {
        MeasureClass::Bounded { delta } => {
            if !(delta > 0.0 && delta <= 1.0) {
                return invalid(format!("density bound {delta} must lie in (0, 1]"));
            }
            let mut m = vec![0.0; space.len()];
            for (&s, &x) in mu.support.iter().zip(&mu.weights) {
                m[s] = x;
            }
            (0..space.len()).map(|x| m[x] / w[x]).collect()
        }
        MeasureClass::Ball { d1, d2 } => {
            if !(d1 > 0.0 && d2 > 0.0) {
                return invalid("ball class parameters must be positive");
            }
            (0..space.len())
                .map(|x| ball_mass(space, mu, x, d1) / ball_mass(space, reference, x, d1))
                .collect()
        }
    };
    Ok(verdict(class, &ratios))
}

/// Ball-class membership for a measure on model coordinates, with centres
/// at the points of the space.
pub fn point_class_membership(
    space: &MetricSpace,
    mu: &PointMeasure,
    reference: &DiscreteMeasure,
    d1: f64,
    d2: f64,
) -> Result<ClassMembership> {
    check_reference(space, reference)?;
    let ratios = (0..space.len())
        .map(|x| Ok(point_ball_mass(space, mu, x, d1)? / ball_mass(space, reference, x, d1)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(verdict(MeasureClass::Ball { d1, d2 }, &ratios))
}

/// Measured densities against the bracket `[C_min, C_max]` and the
/// transport radius `𝔇 = arccos C_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBounds {
    pub covering: usize,
    pub measure_constant: f64,
    pub c_tilde: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Bound on `δ d(x0, x1)` over the support of the plan.
    pub radius: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub max_transport: f64,
    pub passed: bool,
}

impl DensityBounds {
    /// `(C_min / √C_max, C_max / √C_min)`.
    pub fn lift_radii(&self) -> (f64, f64) {
        (self.c_min / self.c_max.sqrt(), self.c_max / self.c_min.sqrt())
    }
}

pub fn density_bounds_check(
    sol: &LetSolution,
    reference: &DiscreteMeasure,
    d1: f64,
    d2: f64,
) -> Result<DensityBounds> {
    let p = &sol.problem;
    let reach = FRAC_PI_2 / p.delta;
    if !(d1 > 0.0 && d1 < reach) {
        return invalid(format!("d1 = {d1} must lie in (0, π/(2δ))"));
    }
    let class = MeasureClass::Ball { d1, d2 };
    for (name, mu) in [("mu0", &p.mu0), ("mu1", &p.mu1)] {
        let m = class_membership(&p.space, mu, reference, class)?;
        if !m.member {
            return Err(Error::Membership(format!(
                "{name} is not in the ball class (d1 = {d1}, d2 = {d2}); witness {:?}",
                m.witness
            )));
        }
    }
    let ratio = (reach + d1) / d1;
    let rep = doubling_constants(&p.space, reference, &ratio_scales(d1, ratio, PI / p.delta))?;
    let covering = rep.max_covering();
    let measure_constant = rep.max_measure();
    let c_tilde = (covering as f64 * measure_constant).sqrt();
    let c_min = cos2_cut(p.delta, d1) * d2 * d2 / c_tilde;
    let c_max = 1.0 / c_min;
    let radius = c_min.min(1.0).acos();
    let mut sigma_min = f64::INFINITY;
    let mut sigma_max: f64 = 0.0;
    for s in sol.sigma0.iter().chain(&sol.sigma1).filter(|s| **s > 0.0) {
        sigma_min = sigma_min.min(*s);
        sigma_max = sigma_max.max(*s);
    }
    let mut max_transport: f64 = 0.0;
    for (i, row) in sol.plan.iter().enumerate() {
        for (j, &h) in row.iter().enumerate() {
            if h > 0.0 {
                max_transport = max_transport.max(p.delta * p.distance(i, j));
            }
        }
    }
    let passed = sigma_min >= c_min && sigma_max <= c_max && max_transport <= radius && radius < FRAC_PI_2;
    Ok(DensityBounds {
        covering,
        measure_constant,
        c_tilde,
        c_min,
        c_max,
        radius,
        sigma_min,
        sigma_max,
        max_transport,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeCheck {
    pub t: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub member: bool,
}

/// Geodesic containment in the ball class with
/// `d1 = (π + 2d̃)/(4δ)`, `d2 = δ_L / (4 C̃)` where `d̃` is the measured
/// transport bound, `δ_L` the density bound and `C̃` the measured doubling
/// constant for the ratio `(π + 2d̃)/(π − 2d̃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub density_delta: f64,
    pub d_tilde: f64,
    pub d1: f64,
    pub d2: f64,
    pub measure_constant: f64,
    pub times: Vec<TimeCheck>,
    pub passed: bool,
}

pub fn geodesic_containment_check(
    sol: &LetSolution,
    reference: &DiscreteMeasure,
    density_delta: f64,
    grid: usize,
) -> Result<ContainmentReport> {
    let p = &sol.problem;
    let class = MeasureClass::Bounded {
        delta: density_delta,
    };
    for (name, mu) in [("mu0", &p.mu0), ("mu1", &p.mu1)] {
        let m = class_membership(&p.space, mu, reference, class)?;
        if !m.member {
            return Err(Error::Membership(format!(
                "{name} is not in the density class {density_delta}; witness {:?}",
                m.witness
            )));
        }
    }
    let mut d_tilde: f64 = 0.0;
    for (i, row) in sol.plan.iter().enumerate() {
        for (j, &h) in row.iter().enumerate() {
            if h > 0.0 {
                d_tilde = d_tilde.max(p.delta * p.distance(i, j));
            }
        }
    }
    let d1 = (PI + 2.0 * d_tilde) / (4.0 * p.delta);
    let inner = (PI - 2.0 * d_tilde) / (4.0 * p.delta);
    let rep = doubling_constants(&p.space, reference, &ratio_scales(inner, d1 / inner, PI / p.delta))?;
    let measure_constant = rep.max_measure();
    let d2 = density_delta / (4.0 * measure_constant);
    let g = geodesic_from_solution(sol, grid)?;
    let mut times = Vec::with_capacity(grid);
    for t in g.times() {
        let m = point_class_membership(&p.space, &g.measure_at(t), reference, d1, d2)?;
        times.push(TimeCheck {
            t,
            min_ratio: m.min_ratio,
            max_ratio: m.max_ratio,
            member: m.member,
        });
    }
    Ok(ContainmentReport {
        passed: times.iter().all(|c| c.member),
        density_delta,
        d_tilde,
        d1,
        d2,
        measure_constant,
        times,
    })
}

fn require_member(space: &MetricSpace, mu: &DiscreteMeasure, reference: &DiscreteMeasure, delta: f64, name: &str) -> Result<()> {
    let m = class_membership(space, mu, reference, MeasureClass::Bounded { delta })?;
    if m.member {
        Ok(())
    } else {
        Err(Error::Membership(format!(
            "{name} is not in the density class {delta}; witness {:?}",
            m.witness
        )))
    }
}

/// Semiconcavity of `t ↦ HK²(μ2, μ(t))` along the geodesic from `μ0` to `μ1`,
/// normalized by `HK²(μ0, μ1)`.
pub fn hk_semiconcavity_estimate(
    p: &LetProblem,
    mu2: &DiscreteMeasure,
    reference: &DiscreteMeasure,
    density_delta: f64,
    tol: f64,
    grid: usize,
) -> Result<SemiconcReport> {
    for (name, mu) in [("mu0", &p.mu0), ("mu1", &p.mu1), ("mu2", mu2)] {
        require_member(&p.space, mu, reference, density_delta, name)?;
    }
    let sol = solve_let(p, tol)?;
    let g = geodesic_from_solution(&sol, grid)?;
    let observer = PointMeasure::from_measure(&p.space, mu2)?;
    let f = g
        .times()
        .iter()
        .map(|&t| Ok(solve_let(&joint_problem(&observer, &g.measure_at(t), p.delta)?, tol)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let h = 1.0 / (grid - 1) as f64;
    estimate_k_from_samples(&f, |i, j| ((j - i) as f64 * h).powi(2) * sol.value)
}

/// Semiconcavity of `t ↦ SHK²(ν2, ν(t))` along the SHK geodesic between
/// probability measures, normalized by `SHK²(ν0, ν1)`. Membership requires
/// densities in `[δ², 1/δ²]`.
pub fn shk_semiconcavity_estimate(
    p: &LetProblem,
    nu2: &DiscreteMeasure,
    reference: &DiscreteMeasure,
    density_delta: f64,
    tol: f64,
    grid: usize,
) -> Result<SemiconcReport> {
    let d2 = density_delta * density_delta;
    for (name, mu) in [("nu0", &p.mu0), ("nu1", &p.mu1), ("nu2", nu2)] {
        if (mu.mass() - 1.0).abs() > 1e-10 {
            return invalid(format!("{name} is not a probability measure"));
        }
        require_member(&p.space, mu, reference, d2, name)?;
    }
    let sol = solve_let(p, tol)?;
    let sg = project_geodesic_to_sphere(geodesic_from_solution(&sol, grid)?)?;
    let observer = PointMeasure::from_measure(&p.space, nu2)?;
    let times = sg.inner.times();
    let f = times
        .iter()
        .map(|&t| {
            let v = solve_let(&joint_problem(&observer, &sg.measure_at(t), p.delta)?, tol)?.value;
            Ok(shk_from_hk2(v).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let h = 1.0 / (grid - 1) as f64;
    let a2 = sg.angle * sg.angle;
    estimate_k_from_samples(&f, |i, j| ((j - i) as f64 * h).powi(2) * a2)
}

/// `𝓛(dx) = (1 + c2)^{−2 d(x_a, x)} 𝓛̃(dx)`, a finite locally doubling
/// version of a doubling reference measure with doubling constant `c2`.
pub fn localized_reference(
    space: &MetricSpace,
    reference: &DiscreteMeasure,
    anchor: usize,
    c2: f64,
) -> Result<DiscreteMeasure> {
    reference.validate(space)?;
    space.point(anchor)?;
    if !(c2 >= 1.0) {
        return invalid(format!("doubling constant {c2} must be at least 1"));
    }
    let base = 1.0 + c2;
    Ok(DiscreteMeasure {
        support: reference.support.clone(),
        weights: reference
            .support
            .iter()
            .zip(&reference.weights)
            .map(|(&x, &w)| w * base.powf(-2.0 * space.d(anchor, x)))
            .collect(),
    })
}
