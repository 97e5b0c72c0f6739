//! Comparison angles, local angles between geodesics and the m-point local
//! angle condition (m-LAC).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cone_geometry::{cone_distance, Cutoff};
use crate::error::{Error, Result};
use crate::metric_base::{Curve, Metric};

const CLAMP_TOL: f64 = 1e-12;

fn clamp_cos(c: f64) -> Result<f64> {
    if !c.is_finite() || c > 1.0 + CLAMP_TOL || c < -1.0 - CLAMP_TOL {
        return Err(Error::Domain(format!("cosine {c} outside [-1, 1]")));
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Cosine `a_κ` of the angle at `x0` of the model triangle with sides
/// `d01, d02, d12` in the plane of constant curvature `κ`.
///
/// Each branch is evaluated as `1 − (…)` with products of half-angle terms,
/// so thin triangles keep full relative accuracy.
pub fn comparison_cos(kappa: f64, d01: f64, d02: f64, d12: f64) -> Result<f64> {
    if !(d01 > 0.0 && d02 > 0.0) {
        return Err(Error::Degenerate("comparison angle needs two nontrivial legs".into()));
    }
    if !(d12 >= 0.0) {
        return Err(Error::Domain(format!("opposite side {d12} must be nonnegative")));
    }
    let p = d12 + d01 - d02;
    let q = d12 - d01 + d02;
    let c = if kappa == 0.0 {
        1.0 - p * q / (2.0 * d01 * d02)
    } else if kappa > 0.0 {
        let k = kappa.sqrt();
        if k * d01 >= PI || k * d02 >= PI {
            return Err(Error::Domain("legs must be shorter than π/√κ".into()));
        }
        1.0 - 2.0 * (0.5 * k * p).sin() * (0.5 * k * q).sin() / ((k * d01).sin() * (k * d02).sin())
    } else {
        let k = (-kappa).sqrt();
        1.0 - 2.0 * (0.5 * k * p).sinh() * (0.5 * k * q).sinh()
            / ((k * d01).sinh() * (k * d02).sinh())
    };
    clamp_cos(c)
}

/// Geometric refinement `s, t ∈ {τ 2^-k : k_min ≤ k ≤ k_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub tau: f64,
    pub k_min: u32,
    pub k_max: u32,
}

impl Schedule {
    /// Samples from `τ 2^-k_min` down to roughly `finest`.
    pub fn down_to(tau: f64, k_min: u32, finest: f64) -> Self {
        let k_max = ((tau / finest).log2().ceil() as u32).max(k_min);
        Schedule { tau, k_min, k_max }
    }

    pub fn levels(&self) -> Vec<f64> {
        (self.k_min..=self.k_max)
            .map(|k| self.tau * 0.5f64.powi(k as i32))
            .collect()
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::down_to(1.0, 8, 1e-3)
    }
}

/// One sampled value `a_0(x0; γ1(s), γ2(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSample {
    pub s: f64,
    pub t: f64,
    pub cos: f64,
}

/// Estimated upper and lower angle between two geodesics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    pub upper: f64,
    pub lower: f64,
    /// Angle from first-order extrapolation along the diagonal `s = t`.
    pub extrapolated: f64,
    pub schedule: Schedule,
    pub samples: Vec<AngleSample>,
}

fn vertex_check<M, C1, C2>(space: &M, g1: &C1, g2: &C2) -> Result<M::Point>
where
    M: Metric,
    C1: Curve<Point = M::Point>,
    C2: Curve<Point = M::Point>,
{
    let v = g1.at(0.0);
    let w = g2.at(0.0);
    if space.distance(&v, &w) > 1e-12 {
        return Err(Error::InvalidInput("geodesics do not share their initial point".into()));
    }
    Ok(v)
}

fn triangle<M, C1, C2>(space: &M, v: &M::Point, g1: &C1, g2: &C2, s: f64, t: f64) -> (f64, f64, f64)
where
    M: Metric,
    C1: Curve<Point = M::Point>,
    C2: Curve<Point = M::Point>,
{
    let p = g1.at(s);
    let q = g2.at(t);
    (space.distance(v, &p), space.distance(v, &q), space.distance(&p, &q))
}

/// Largest `|a_0 − a_κ|` over the given `(s, t)` pairs, and the fitted
/// constant `max gap / (s + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaGap {
    pub max_gap: f64,
    pub rate: f64,
}

pub fn kappa_independence_gap<M, C1, C2>(
    space: &M,
    g1: &C1,
    g2: &C2,
    kappa: f64,
    grid: &[(f64, f64)],
) -> Result<KappaGap>
where
    M: Metric,
    C1: Curve<Point = M::Point>,
    C2: Curve<Point = M::Point>,
{
    let v = vertex_check(space, g1, g2)?;
    let mut out = KappaGap {
        max_gap: 0.0,
        rate: 0.0,
    };
    for &(s, t) in grid {
        let (a, b, c) = triangle(space, &v, g1, g2, s, t);
        let gap = (comparison_cos(0.0, a, b, c)? - comparison_cos(kappa, a, b, c)?).abs();
        out.max_gap = out.max_gap.max(gap);
        out.rate = out.rate.max(gap / (s + t));
    }
    Ok(out)
}

/// Upper and lower angle of `γ1, γ2` at their common start.
pub fn local_angles<M, C1, C2>(space: &M, g1: &C1, g2: &C2, schedule: Schedule) -> Result<AngleReport>
where
    M: Metric,
    C1: Curve<Point = M::Point>,
    C2: Curve<Point = M::Point>,
{
    let v = vertex_check(space, g1, g2)?;
    let levels = schedule.levels();
    if levels.is_empty() {
        return Err(Error::InvalidInput("empty refinement schedule".into()));
    }
    let mut samples = Vec::with_capacity(levels.len() * levels.len());
    for &s in &levels {
        for &t in &levels {
            let (a, b, c) = triangle(space, &v, g1, g2, s, t);
            if a == 0.0 || b == 0.0 {
                return Err(Error::Degenerate("a geodesic is constant near its start".into()));
            }
            samples.push(AngleSample {
                s,
                t,
                cos: comparison_cos(0.0, a, b, c)?,
            });
        }
    }
    let lo = samples.iter().map(|x| x.cos).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|x| x.cos).fold(f64::NEG_INFINITY, f64::max);
    let n = levels.len();
    let diag = |k: usize| samples[k * n + k].cos;
    let extrapolated = if n >= 2 {
        (2.0 * diag(n - 1) - diag(n - 2)).clamp(-1.0, 1.0)
    } else {
        diag(0)
    };
    Ok(AngleReport {
        upper: lo.acos(),
        lower: hi.acos(),
        extrapolated: extrapolated.acos(),
        schedule,
        samples,
    })
}

/// Cosine of the cone angle at `[x0, r0]` between the lifts of two base
/// geodesics from `x0` to base points at distances `φ01, φ02`.
pub fn cone_angle_from_base(
    r0: f64,
    r1: f64,
    r2: f64,
    phi01: f64,
    phi02: f64,
    cos_base: f64,
) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(Error::Domain("the vertex must not be the apex".into()));
    }
    let d01 = cone_distance(r0, r1, phi01, Cutoff::Pi);
    let d02 = cone_distance(r0, r2, phi02, Cutoff::Pi);
    if d01 == 0.0 || d02 == 0.0 {
        return Err(Error::Degenerate("a leg of the cone angle has zero length".into()));
    }
    let num = (r0 - r1 * phi01.cos()) * (r0 - r2 * phi02.cos())
        + r1 * r2 * phi01.sin() * phi02.sin() * cos_base;
    clamp_cos(num / (d01 * d02))
}

/// Inverse of [`cone_angle_from_base`] in its last argument.
pub fn base_angle_from_cone(
    r0: f64,
    r1: f64,
    r2: f64,
    phi01: f64,
    phi02: f64,
    cos_cone: f64,
) -> Result<f64> {
    let d01 = cone_distance(r0, r1, phi01, Cutoff::Pi);
    let d02 = cone_distance(r0, r2, phi02, Cutoff::Pi);
    let den = r1 * r2 * phi01.sin() * phi02.sin();
    if den == 0.0 {
        return Err(Error::Degenerate("base angle undefined for radial legs".into()));
    }
    let num = d01 * d02 * cos_cone - (r0 - r1 * phi01.cos()) * (r0 - r2 * phi02.cos());
    clamp_cos(num / den)
}

/// Which test decided an m-LAC verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlacMethod {
    Trivial,
    AngleSum,
    Copositivity,
}

/// Outcome of an m-LAC check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlacReport {
    pub m: usize,
    pub satisfied: bool,
    pub method: MlacMethod,
    pub angle_sum: Option<f64>,
    /// Smallest `bᵀGb` found over the simplex.
    pub min_form: f64,
    /// A weight vector with `bᵀGb < −tol`, when one was found.
    pub violating_weights: Option<Vec<f64>>,
    /// Simplex grid resolution `N` (weights are multiples of `1/N`).
    pub grid_resolution: usize,
    pub angles: Vec<Vec<f64>>,
}

fn quad(g: &[Vec<f64>], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, gi) in g.iter().enumerate() {
        for (j, gij) in gi.iter().enumerate() {
            s += b[i] * gij * b[j];
        }
    }
    s
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let th = (cum - 1.0) / (k + 1) as f64;
        if x - th > 0.0 {
            theta = th;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn descend(g: &[Vec<f64>], mut b: Vec<f64>) -> (f64, Vec<f64>) {
    let m = b.len();
    let lip = 2.0 * g.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let mut val = quad(g, &b);
    for _ in 0..500 {
        let grad: Vec<f64> = (0..m)
            .map(|i| 2.0 * (0..m).map(|j| g[i][j] * b[j]).sum::<f64>())
            .collect();
        let cand = project_simplex(&b.iter().zip(&grad).map(|(x, d)| x - step * d).collect::<Vec<_>>());
        let v = quad(g, &cand);
        if v >= val - 1e-16 {
            break;
        }
        b = cand;
        val = v;
    }
    (val, b)
}

// visits every composition of `total` into `parts` nonnegative integers
fn compositions(parts: usize, total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, parts: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for k in 0..=left {
            buf.push(k);
            rec(buf, parts, left - k, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(parts), parts, total, f);
}

const MAX_GRID_POINTS: f64 = 2.0e6;

/// Minimizes `bᵀGb` over the simplex: exhaustive grid plus projected
/// gradient polish from the best grid points.
pub fn copositivity_minimum(g: &[Vec<f64>]) -> (f64, Vec<f64>, usize) {
    let m = g.len();
    let mut n = 64usize;
    while n > 1 && binomial(n + m - 1, m - 1) > MAX_GRID_POINTS {
        n /= 2;
    }
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    compositions(m, n, &mut |c| {
        let b: Vec<f64> = c.iter().map(|&k| k as f64 / n as f64).collect();
        let v = quad(g, &b);
        if best.len() < 5 || v < best[best.len() - 1].0 {
            best.push((v, b));
            best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            best.truncate(5);
        }
    });
    let mut out = (f64::INFINITY, vec![0.0; m]);
    for (_, b) in best {
        let (v, b) = descend(g, b);
        if v < out.0 {
            out = (v, b);
        }
    }
    (out.0, out.1, n)
}

/// Decides m-LAC from a matrix of upper angles.
pub fn mlac_from_angles(angles: &[Vec<f64>], tol: f64) -> Result<MlacReport> {
    let m = angles.len();
    if m == 0 {
        return Err(Error::InvalidInput("m-LAC needs at least one geodesic".into()));
    }
    if angles.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("angle matrix must be square".into()));
    }
    let mut report = MlacReport {
        m,
        satisfied: true,
        method: MlacMethod::Trivial,
        angle_sum: None,
        min_form: 0.0,
        violating_weights: None,
        grid_resolution: 0,
        angles: angles.to_vec(),
    };
    if m <= 2 {
        return Ok(report);
    }
    let g: Vec<Vec<f64>> = angles
        .iter()
        .map(|r| r.iter().map(|a| a.cos()).collect())
        .collect();
    let (min_form, b, n) = copositivity_minimum(&g);
    report.min_form = min_form;
    report.grid_resolution = n;
    if min_form < -tol {
        report.violating_weights = Some(b);
    }
    if m == 3 {
        let sum = angles[0][1] + angles[1][2] + angles[2][0];
        report.method = MlacMethod::AngleSum;
        report.angle_sum = Some(sum);
        report.satisfied = sum <= 2.0 * PI + tol;
    } else {
        report.method = MlacMethod::Copositivity;
        report.satisfied = min_form >= -tol;
    }
    Ok(report)
}

/// m-LAC at the common start of `geodesics`, with upper angles estimated
/// by [`local_angles`].
pub fn mlac_check<M, C>(space: &M, geodesics: &[C], schedule: Schedule, tol: f64) -> Result<MlacReport>
where
    M: Metric,
    C: Curve<Point = M::Point>,
{
    let m = geodesics.len();
    let mut angles = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let a = local_angles(space, &geodesics[i], &geodesics[j], schedule)?.upper;
            angles[i][j] = a;
            angles[j][i] = a;
        }
    }
    mlac_from_angles(&angles, tol)
}

/// Angles at the apex of the cone between rays over the given base
/// distances: `d_Y(xi, xj) ∧ π`.
pub fn apex_angles(base_distances: &[Vec<f64>]) -> Vec<Vec<f64>> {
    base_distances
        .iter()
        .map(|r| r.iter().map(|d| d.min(PI)).collect())
        .collect()
}
