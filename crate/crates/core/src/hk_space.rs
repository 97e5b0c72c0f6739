//! Hellinger–Kantorovich distances, their geodesics and cone lifts.
//!
//! An optimal LET plan `H` with densities `σ0, σ1` lifts to a transport
//! plan on the cone: every pair `(x0, x1)` charged by `H` becomes a cone
//! geodesic from `[x0, 1/√σ0]` to `[x1, 1/√σ1]` carrying weight `H(x0, x1)`,
//! and every atom out of range of the other measure is joined to the apex.
//! Projecting the moving cone points with `𝔓(λ) = ∫ r² dλ` yields the
//! measure geodesic.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cone_geometry::{cone_distance_sq, ConeGeodesic, Cutoff};
use crate::error::{invalid, Error, Result};
use crate::let_solver::{solve_let, DiscreteMeasure, LetProblem, LetSolution};
use crate::metric_base::{BaseGeodesic, MetricSpace, Model, Point};

const MERGE_TOL: f64 = 1e-12;

/// `HK_δ(μ0, μ1)`.
pub fn hk(p: &LetProblem, tol: f64) -> Result<f64> {
    Ok(solve_let(p, tol)?.value.max(0.0).sqrt())
}

fn check_probability(mu: &DiscreteMeasure, name: &str) -> Result<()> {
    let m = mu.mass();
    if (m - 1.0).abs() > 1e-10 {
        return invalid(format!("{name} has mass {m}, expected a probability measure"));
    }
    Ok(())
}

/// `SHK_δ(ν0, ν1) = arccos(1 − HK_δ²/2)` for probability measures.
pub fn shk(p: &LetProblem, tol: f64) -> Result<f64> {
    check_probability(&p.mu0, "mu0")?;
    check_probability(&p.mu1, "mu1")?;
    let v = solve_let(p, tol)?.value;
    Ok(shk_from_hk2(v))
}

/// `arccos(1 − v/2)`, with `v` clamped to `[0, 2]`.
pub fn shk_from_hk2(v: f64) -> f64 {
    (1.0 - 0.5 * v.clamp(0.0, 2.0)).acos()
}

/// Result of comparing `HK²(r0²μ0, r1²μ1)` with the scaling formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub scaled_value: f64,
    pub predicted: f64,
    pub residual: f64,
    /// Largest entry of `|H_scaled − r0 r1 H|`.
    pub plan_deviation: f64,
}

/// `HK²(r0²μ0, r1²μ1) − [r0 r1 HK²(μ0, μ1) + (r0² − r0 r1) μ0(X) + (r1² − r0 r1) μ1(X)]`.
pub fn scaling_residual(p: &LetProblem, r0: f64, r1: f64, tol: f64) -> Result<ScalingReport> {
    if !(r0 >= 0.0 && r1 >= 0.0) || !r0.is_finite() || !r1.is_finite() {
        return invalid("scales must be finite and nonnegative");
    }
    let base = solve_let(p, tol)?;
    let scaled = solve_let(&p.scaled(r0 * r0, r1 * r1), tol)?;
    let (m0, m1) = (p.mu0.mass(), p.mu1.mass());
    let predicted =
        r0 * r1 * base.value + (r0 * r0 - r0 * r1) * m0 + (r1 * r1 - r0 * r1) * m1;
    let mut dev: f64 = 0.0;
    if r0 > 0.0 && r1 > 0.0 {
        for (a, b) in scaled.plan.iter().zip(&base.plan) {
            for (x, y) in a.iter().zip(b) {
                dev = dev.max((x - r0 * r1 * y).abs());
            }
        }
    }
    Ok(ScalingReport {
        scaled_value: scaled.value,
        predicted,
        residual: scaled.value - predicted,
        plan_deviation: dev,
    })
}

/// `HK²(r0²ν0, r1²ν1) − (r0² + r1² − 2 r0 r1 cos SHK(ν0, ν1))` for probability measures.
pub fn cone_structure_residual(p: &LetProblem, r0: f64, r1: f64, tol: f64) -> Result<f64> {
    let angle = shk(p, tol)?;
    let v = solve_let(&p.scaled(r0 * r0, r1 * r1), tol)?.value;
    Ok(v - (r0 * r0 + r1 * r1 - 2.0 * r0 * r1 * angle.cos()))
}

/// A finitely supported measure on model coordinates, used for the
/// intermediate measures of a geodesic, which live on new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeasure {
    pub model: Model,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl PointMeasure {
    pub fn from_measure(space: &MetricSpace, mu: &DiscreteMeasure) -> Result<Self> {
        let model = space.model().ok_or(Error::NoInterpolation(space.kind().name()))?;
        let points = mu
            .support
            .iter()
            .map(|&i| space.point(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(PointMeasure {
            model,
            points,
            weights: mu.weights.clone(),
        })
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    // adds mass at p, merging with an existing atom within MERGE_TOL
    fn push(&mut self, p: Point, w: f64) {
        if w <= 0.0 {
            return;
        }
        match self
            .points
            .iter()
            .position(|q| self.model.dist(q, &p) <= MERGE_TOL)
        {
            Some(k) => self.weights[k] += w,
            None => {
                self.points.push(p);
                self.weights.push(w);
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = PointMeasure {
            model: self.model,
            points: Vec::new(),
            weights: Vec::new(),
        };
        for (p, w) in self.points.iter().zip(&self.weights) {
            out.push(p.clone(), c * w);
        }
        out
    }

    /// Largest atom-wise weight difference after matching points within `1e-9`;
    /// unmatched atoms count fully.
    pub fn max_difference(&self, other: &PointMeasure) -> f64 {
        let mut worst: f64 = 0.0;
        let mut used = vec![false; other.len()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            match other
                .points
                .iter()
                .position(|q| self.model.dist(p, q) <= 1e-9)
            {
                Some(k) => {
                    used[k] = true;
                    worst = worst.max((w - other.weights[k]).abs());
                }
                None => worst = worst.max(*w),
            }
        }
        for (k, u) in used.iter().enumerate() {
            if !u {
                worst = worst.max(other.weights[k]);
            }
        }
        worst
    }
}

/// The LET problem between two point measures on the union of their supports.
pub fn joint_problem(a: &PointMeasure, b: &PointMeasure, delta: f64) -> Result<LetProblem> {
    if a.model != b.model {
        return invalid("measures live on different models");
    }
    let mut pts: Vec<Point> = Vec::new();
    let index = |p: &Point, pts: &mut Vec<Point>| -> usize {
        match pts.iter().position(|q| a.model.dist(q, p) <= MERGE_TOL) {
            Some(k) => k,
            None => {
                pts.push(p.clone());
                pts.len() - 1
            }
        }
    };
    let side = |m: &PointMeasure, pts: &mut Vec<Point>| -> Result<DiscreteMeasure> {
        let mut support = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (p, &w) in m.points.iter().zip(&m.weights) {
            let k = index(p, pts);
            match support.iter().position(|&s| s == k) {
                Some(at) => weights[at] += w,
                None => {
                    support.push(k);
                    weights.push(w);
                }
            }
        }
        DiscreteMeasure::new(support, weights)
    };
    let mu0 = side(a, &mut pts)?;
    let mu1 = side(b, &mut pts)?;
    let space = MetricSpace::from_points(a.model, pts)?;
    LetProblem::new(Arc::new(space), mu0, mu1, delta)
}

/// `HK_δ` between two point measures.
pub fn hk_points(a: &PointMeasure, b: &PointMeasure, delta: f64, tol: f64) -> Result<f64> {
    hk(&joint_problem(a, b, delta)?, tol)
}

/// One transported pair of the optimal plan, as a weighted cone geodesic.
#[derive(Debug, Clone)]
pub struct Ray {
    /// Atom indices in `μ0` and `μ1`.
    pub atoms: (usize, usize),
    pub weight: f64,
    pub cone: ConeGeodesic<BaseGeodesic>,
}

impl Ray {
    pub fn mass_at(&self, t: f64) -> f64 {
        self.weight * self.cone.rho_sq(t)
    }
}

/// An atom that is only created or annihilated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unmatched {
    /// 0 for an atom of `μ0` (annihilated), 1 for `μ1` (created).
    pub side: u8,
    pub atom: usize,
    pub point: usize,
    pub mass: f64,
}

impl Unmatched {
    pub fn mass_at(&self, t: f64) -> f64 {
        if self.side == 0 {
            (1.0 - t).powi(2) * self.mass
        } else {
            t * t * self.mass
        }
    }
}

/// The HK geodesic between the marginals of an optimal LET solution.
#[derive(Debug, Clone)]
pub struct MeasureGeodesic {
    pub space: Arc<MetricSpace>,
    pub model: Model,
    pub delta: f64,
    pub rays: Vec<Ray>,
    pub unmatched: Vec<Unmatched>,
    pub masses: (f64, f64),
    /// `HK_δ²(μ0, μ1)`.
    pub hk2: f64,
    /// Number of uniform samples used by [`MeasureGeodesic::samples`].
    pub grid: usize,
}

pub fn geodesic_from_solution(sol: &LetSolution, grid: usize) -> Result<MeasureGeodesic> {
    let p = &sol.problem;
    let model = p
        .space
        .model()
        .ok_or(Error::NoInterpolation(p.space.kind().name()))?;
    if grid < 2 {
        return invalid("geodesic grid needs at least 2 points");
    }
    let total: f64 = p.mu0.mass() + p.mu1.mass();
    let floor = 1e-14 * total;
    let mut rays = Vec::new();
    for (i, row) in sol.plan.iter().enumerate() {
        for (j, &h) in row.iter().enumerate() {
            if h <= floor {
                continue;
            }
            let (s0, s1) = (sol.sigma0[i], sol.sigma1[j]);
            if !(s0 > 0.0 && s1 > 0.0) {
                return Err(Error::Degenerate(format!(
                    "matched pair ({i}, {j}) has a zero density"
                )));
            }
            let (x0, x1) = (p.mu0.support[i], p.mu1.support[j]);
            let base = p.space.geodesic(x0, x1)?;
            let phi = p.delta * p.space.d(x0, x1);
            let cone = ConeGeodesic::connecting(base, phi, 1.0 / s0.sqrt(), 1.0 / s1.sqrt())?;
            rays.push(Ray {
                atoms: (i, j),
                weight: h,
                cone,
            });
        }
    }
    // atoms whose transported share was dropped or never existed
    let mut unmatched = Vec::new();
    for (i, (&x, &w)) in p.mu0.support.iter().zip(&p.mu0.weights).enumerate() {
        if sol.sigma0[i] == 0.0 {
            unmatched.push(Unmatched {
                side: 0,
                atom: i,
                point: x,
                mass: w,
            });
        }
    }
    for (j, (&x, &w)) in p.mu1.support.iter().zip(&p.mu1.weights).enumerate() {
        if sol.sigma1[j] == 0.0 {
            unmatched.push(Unmatched {
                side: 1,
                atom: j,
                point: x,
                mass: w,
            });
        }
    }
    Ok(MeasureGeodesic {
        space: p.space.clone(),
        model,
        delta: p.delta,
        rays,
        unmatched,
        masses: (p.mu0.mass(), p.mu1.mass()),
        hk2: sol.value,
        grid,
    })
}

impl MeasureGeodesic {
    /// Total mass `m(t)`.
    pub fn mass(&self, t: f64) -> f64 {
        self.rays.iter().map(|r| r.mass_at(t)).sum::<f64>()
            + self.unmatched.iter().map(|u| u.mass_at(t)).sum::<f64>()
    }

    /// `(1 − t) m0 + t m1 − t (1 − t) HK²`.
    pub fn mass_law(&self, t: f64) -> f64 {
        (1.0 - t) * self.masses.0 + t * self.masses.1 - t * (1.0 - t) * self.hk2
    }

    /// `μ(t)`, with atoms at coincident points merged.
    pub fn measure_at(&self, t: f64) -> PointMeasure {
        let mut out = PointMeasure {
            model: self.model,
            points: Vec::new(),
            weights: Vec::new(),
        };
        for r in &self.rays {
            let z = r.cone.at(t);
            out.push(z.x, r.weight * z.r * z.r);
        }
        for u in &self.unmatched {
            out.push(self.space.points()[u.point].clone(), u.mass_at(t));
        }
        out
    }

    /// `A(t)² μ(B(t))`, the geodesic from `s0² μ0` to `s1² μ1` obtained by
    /// rescaling the cone curves with `A(t) = s0 + (s1 − s0) t`, `B(t) = s1 t / A(t)`.
    pub fn rescaled_measure_at(&self, s0: f64, s1: f64, t: f64) -> PointMeasure {
        let a = s0 + (s1 - s0) * t;
        let b = if a == 0.0 { 0.0 } else { (s1 * t / a).clamp(0.0, 1.0) };
        self.measure_at(b).scaled(a * a)
    }

    /// Uniform times `i / (grid − 1)`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.grid)
            .map(|i| i as f64 / (self.grid - 1) as f64)
            .collect()
    }

    pub fn samples(&self) -> Vec<(f64, PointMeasure)> {
        self.times()
            .into_iter()
            .map(|t| (t, self.measure_at(t)))
            .collect()
    }

    /// Largest `|m(t) − mass_law(t)|` on the grid.
    pub fn mass_law_residual(&self) -> f64 {
        self.times()
            .iter()
            .map(|&t| (self.mass(t) - self.mass_law(t)).abs())
            .fold(0.0, f64::max)
    }

    /// `|HK(μ(s), μ(t)) − |t − s| HK(μ0, μ1)|`.
    pub fn speed_residual(&self, s: f64, t: f64, tol: f64) -> Result<f64> {
        let d = hk_points(&self.measure_at(s), &self.measure_at(t), self.delta, tol)?;
        Ok((d - (t - s).abs() * self.hk2.max(0.0).sqrt()).abs())
    }
}

/// The SHK geodesic between `μ0/m0` and `μ1/m1`, a reparametrized and
/// normalized [`MeasureGeodesic`].
#[derive(Debug, Clone)]
pub struct SphericalGeodesic {
    pub inner: MeasureGeodesic,
    /// `SHK(ν0, ν1)`.
    pub angle: f64,
    radii: (f64, f64),
}

pub fn project_geodesic_to_sphere(g: MeasureGeodesic) -> Result<SphericalGeodesic> {
    let (m0, m1) = g.masses;
    if !(m0 > 0.0 && m1 > 0.0) {
        return Err(Error::Degenerate("an endpoint has zero mass".into()));
    }
    let c = (m0 + m1 - g.hk2) / (2.0 * (m0 * m1).sqrt());
    let angle = c.clamp(-1.0, 1.0).acos();
    Ok(SphericalGeodesic {
        inner: g,
        angle,
        radii: (m0.sqrt(), m1.sqrt()),
    })
}

impl SphericalGeodesic {
    /// `σ(t) = r0 sin(tφ) / (r1 sin((1 − t)φ) + r0 sin(tφ))`, and its
    /// `φ → 0` limit `r0 t / (r1 (1 − t) + r0 t)`.
    pub fn sigma(&self, t: f64) -> f64 {
        let (r0, r1) = self.radii;
        let phi = self.angle;
        if phi < 1e-12 {
            return r0 * t / (r1 * (1.0 - t) + r0 * t);
        }
        let a = r0 * (t * phi).sin();
        a / (r1 * ((1.0 - t) * phi).sin() + a)
    }

    /// `ν(t) = μ(σ(t)) / m(σ(t))`.
    pub fn measure_at(&self, t: f64) -> PointMeasure {
        let s = self.sigma(t);
        let mu = self.inner.measure_at(s);
        let m = mu.mass();
        mu.scaled(1.0 / m)
    }

    /// `|SHK(ν(s), ν(t)) − |t − s| SHK(ν0, ν1)|`.
    pub fn speed_residual(&self, s: f64, t: f64, tol: f64) -> Result<f64> {
        let p = joint_problem(&self.measure_at(s), &self.measure_at(t), self.inner.delta)?;
        let v = solve_let(&p, tol)?.value;
        Ok((shk_from_hk2(v) - (t - s).abs() * self.angle).abs())
    }
}

/// One weighted pair of cone points; `None` is the apex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedPair {
    pub atom0: Option<usize>,
    pub r0: f64,
    pub atom1: Option<usize>,
    pub r1: f64,
    pub weight: f64,
}

/// A discrete plan on cone × cone whose projected marginals are `μ0, μ1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPlan {
    pub problem: LetProblem,
    pub pairs: Vec<LiftedPair>,
    pub cutoff: Cutoff,
}

/// Lift of an optimal LET solution: radii `1/√σ`, unmatched atoms paired with the apex.
pub fn cone_lift_certificate(sol: &LetSolution) -> LiftedPlan {
    let p = &sol.problem;
    let mut pairs = Vec::new();
    for (i, row) in sol.plan.iter().enumerate() {
        for (j, &h) in row.iter().enumerate() {
            if h > 0.0 && sol.sigma0[i] > 0.0 && sol.sigma1[j] > 0.0 {
                pairs.push(LiftedPair {
                    atom0: Some(i),
                    r0: 1.0 / sol.sigma0[i].sqrt(),
                    atom1: Some(j),
                    r1: 1.0 / sol.sigma1[j].sqrt(),
                    weight: h,
                });
            }
        }
    }
    for (i, &w) in p.mu0.weights.iter().enumerate() {
        if sol.sigma0[i] == 0.0 {
            pairs.push(LiftedPair {
                atom0: Some(i),
                r0: 1.0,
                atom1: None,
                r1: 0.0,
                weight: w,
            });
        }
    }
    for (j, &w) in p.mu1.weights.iter().enumerate() {
        if sol.sigma1[j] == 0.0 {
            pairs.push(LiftedPair {
                atom0: None,
                r0: 0.0,
                atom1: Some(j),
                r1: 1.0,
                weight: w,
            });
        }
    }
    LiftedPlan {
        problem: p.clone(),
        pairs,
        cutoff: Cutoff::HalfPi,
    }
}

impl LiftedPlan {
    fn pair_cost(&self, q: &LiftedPair) -> f64 {
        let phi = match (q.atom0, q.atom1) {
            (Some(i), Some(j)) => self.problem.delta * self.problem.distance(i, j),
            _ => FRAC_PI_2,
        };
        cone_distance_sq(q.r0, q.r1, phi, self.cutoff)
    }

    /// `Σ w d²_𝔠(z0, z1)`.
    pub fn cost(&self) -> f64 {
        self.pairs.iter().map(|q| q.weight * self.pair_cost(q)).sum()
    }

    /// Projected marginals `Σ w r²`, per atom of `μ0` and `μ1`.
    pub fn projections(&self) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.problem.mu0.len()];
        let mut b = vec![0.0; self.problem.mu1.len()];
        for q in &self.pairs {
            if let Some(i) = q.atom0 {
                a[i] += q.weight * q.r0 * q.r0;
            }
            if let Some(j) = q.atom1 {
                b[j] += q.weight * q.r1 * q.r1;
            }
        }
        (a, b)
    }

    /// Largest atom-wise deviation of the projections from `μ0, μ1`.
    pub fn marginal_error(&self) -> f64 {
        let (a, b) = self.projections();
        a.iter()
            .zip(&self.problem.mu0.weights)
            .chain(b.iter().zip(&self.problem.mu1.weights))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Radii range over pairs, ignoring apex endpoints.
    pub fn radius_range(&self) -> (f64, f64) {
        let rs = self
            .pairs
            .iter()
            .flat_map(|q| [(q.atom0, q.r0), (q.atom1, q.r1)])
            .filter(|(a, r)| a.is_some() && *r > 0.0)
            .map(|(_, r)| r);
        rs.fold((f64::INFINITY, 0.0), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }
}

/// Divides the radii of pair `k` by `θ_k` and multiplies its weight by `θ_k²`.
pub fn dilate(plan: &LiftedPlan, theta: &[f64]) -> Result<LiftedPlan> {
    if theta.len() != plan.pairs.len() {
        return invalid(format!(
            "{} dilation factors for {} pairs",
            theta.len(),
            plan.pairs.len()
        ));
    }
    if let Some(t) = theta.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!("dilation factor {t} must be positive")));
    }
    let pairs = plan
        .pairs
        .iter()
        .zip(theta)
        .map(|(q, &t)| LiftedPair {
            r0: q.r0 / t,
            r1: q.r1 / t,
            weight: q.weight * t * t,
            ..*q
        })
        .collect();
    Ok(LiftedPlan {
        pairs,
        ..plan.clone()
    })
}

/// Upper bound of the SHK distance.
pub const SHK_DIAMETER: f64 = PI / 2.0;
