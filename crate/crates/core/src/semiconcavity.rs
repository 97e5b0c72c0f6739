//! Semiconcavity of squared distances along geodesics.
//!
//! A function `f` on `[0, 1]` is `K d²`-semiconcave along a geodesic of
//! length `d` when
//!
//! ```text
//! f(t) + K t (1 − t) d² ≥ (1 − t) f(0) + t f(1)
//! ```
//!
//! holds on every sub-geodesic. The estimators below sample `f` on a uniform
//! grid and return the smallest `K` that satisfies this three-point
//! inequality on every ordered grid triple. With this convention the squared
//! Euclidean distance has `K = 1`; [`SemiconcReport::excess`] reports `K − 1`,
//! which vanishes in flat space.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cone_geometry::radius_lower_bound;
use crate::error::{Error, Result};
use crate::metric_base::{Curve, Metric};

/// `C = Σ_{n≥1} 4n π^{2n−2} / (2n+1)!`, summed until terms drop below `1e-15`.
pub fn sine_series_constant() -> f64 {
    sine_series_partial(usize::MAX)
}

/// Partial sum of the series with at most `terms` terms.
pub fn sine_series_partial(terms: usize) -> f64 {
    let mut sum = 0.0;
    let mut fact = 6.0; // (2n+1)! at n = 1
    let mut pow = 1.0; // π^{2n−2}
    let mut n = 1usize;
    while n <= terms {
        let term = 4.0 * n as f64 * pow / fact;
        if term < 1e-15 {
            break;
        }
        sum += term;
        n += 1;
        fact *= (2 * n) as f64 * (2 * n + 1) as f64;
        pow *= PI * PI;
    }
    sum
}

/// `C t (1 − t) x³ − |sin(xt) − t sin x|`, nonnegative for `t ∈ [0,1], x ∈ [0,π]`.
pub fn sine_interpolation_margin(t: f64, x: f64) -> f64 {
    sine_series_constant() * t * (1.0 - t) * x.powi(3) - ((x * t).sin() - t * x.sin()).abs()
}

/// The observed function of the distance to the observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `1 − cos d`
    F1,
    /// `d²`
    F2,
}

impl Variant {
    pub fn apply(self, d: f64) -> f64 {
        match self {
            Variant::F1 => 2.0 * (0.5 * d).sin().powi(2),
            Variant::F2 => d * d,
        }
    }
}

/// Grid estimate of the semiconcavity constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconcReport {
    /// Smallest `K` satisfying every sampled three-point inequality.
    pub k: f64,
    /// `(t1, t2, t)` of the binding triple: the sub-geodesic `[t1, t2]` and
    /// the relative position `t` inside it.
    pub worst: (f64, f64, f64),
    /// Number of uniform grid points on `[0, 1]`.
    pub grid: usize,
    /// Distance between the endpoints.
    pub base_distance: f64,
}

impl SemiconcReport {
    /// `K − 1`: zero for squared distances in flat space.
    pub fn excess(&self) -> f64 {
        self.k - 1.0
    }
}

/// Estimates `K` from samples `f[i] = f(i / (n − 1))`, where `d2(i, j)` is
/// the squared distance between the curve points at grid indices `i < j`.
pub fn estimate_k_from_samples(
    f: &[f64],
    d2: impl Fn(usize, usize) -> f64,
) -> Result<SemiconcReport> {
    let n = f.len();
    if n < 3 {
        return Err(Error::InvalidInput("semiconcavity needs at least 3 grid points".into()));
    }
    let h = 1.0 / (n - 1) as f64;
    let full = d2(0, n - 1);
    if !(full > 0.0) {
        return Err(Error::Degenerate("zero-length geodesic".into()));
    }
    let mut k = f64::NEG_INFINITY;
    let mut worst = (0.0, 1.0, 0.5);
    for i in 0..n {
        for j in (i + 2)..n {
            let dij = d2(i, j);
            if !(dij > 0.0) {
                continue;
            }
            let span = (j - i) as f64;
            for m in (i + 1)..j {
                let t = (m - i) as f64 / span;
                let chord = (1.0 - t) * f[i] + t * f[j];
                let ratio = (chord - f[m]) / (t * (1.0 - t) * dij);
                if ratio > k {
                    k = ratio;
                    worst = (i as f64 * h, j as f64 * h, t);
                }
            }
        }
    }
    Ok(SemiconcReport {
        k,
        worst,
        grid: n,
        base_distance: full.sqrt(),
    })
}

/// Semiconcavity of `variant(d(x2, γ(t)))` along `γ`.
pub fn estimate_k<M, C>(
    space: &M,
    geodesic: &C,
    observer: &M::Point,
    variant: Variant,
    grid: usize,
) -> Result<SemiconcReport>
where
    M: Metric,
    C: Curve<Point = M::Point>,
{
    if grid < 3 {
        return Err(Error::InvalidInput("semiconcavity needs at least 3 grid points".into()));
    }
    let pts: Vec<M::Point> = (0..grid)
        .map(|i| geodesic.at(i as f64 / (grid - 1) as f64))
        .collect();
    let f: Vec<f64> = pts
        .iter()
        .map(|p| variant.apply(space.distance(observer, p)))
        .collect();
    estimate_k_from_samples(&f, |i, j| space.distance(&pts[i], &pts[j]).powi(2))
}

/// `M(𝔇) = max_{y ∈ [0, 2𝔇]} y / sin y = 2𝔇 / sin 2𝔇`.
pub fn m_constant(radius: f64) -> Result<f64> {
    check_radius(radius)?;
    Ok(if radius == 0.0 {
        1.0
    } else {
        2.0 * radius / (2.0 * radius).sin()
    })
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius >= 0.0 && radius < PI / 2.0) {
        return Err(Error::Domain(format!("ball radius {radius} must lie in [0, π/2)")));
    }
    Ok(())
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("semiconcavity constant {k} must be positive")));
    }
    Ok(())
}

/// Constant for `d²` given that `1 − cos d` is `K d01²`-semiconcave inside a
/// ball of radius `𝔇`: `(1 + (1 + K)/(π − 2𝔇)) d01²`.
pub fn transfer_f1_to_f2(k: f64, radius: f64, d01: f64) -> Result<f64> {
    check_k(k)?;
    check_radius(radius)?;
    Ok((1.0 + (1.0 + k) / (PI - 2.0 * radius)) * d01 * d01)
}

/// Constant for `1 − cos d` given that `d²` is `K d01²`-semiconcave: `(1 + K) d01²`.
pub fn transfer_f2_to_f1(k: f64, d01: f64) -> Result<f64> {
    check_k(k)?;
    Ok((1.0 + k) * d01 * d01)
}

/// Constants entering the cone transfer bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferConstants {
    pub c: f64,
    pub m: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub radius: f64,
}

impl TransferConstants {
    /// Constants for cone points over a ball of radius `𝔇` with radii in
    /// `{r0, r1}`; `r_min` bounds the radius along every such geodesic.
    pub fn new(radius: f64, r0: f64, r1: f64) -> Result<Self> {
        if !(r0 > 0.0 && r1 > 0.0) {
            return Err(Error::Domain("cone radii must be positive".into()));
        }
        Ok(TransferConstants {
            c: sine_series_constant(),
            m: m_constant(radius)?,
            r_min: radius_lower_bound(r0, r1, 2.0 * radius),
            r_max: r0.max(r1),
            radius,
        })
    }
}

/// Cone semiconcavity constant from base `K` (first part of the transfer):
/// `r2 (4 C M³ + (K + 1) M²) / (4 r_min) + 1`.
pub fn cone_transfer_a(k: f64, r0: f64, r1: f64, r2: f64, radius: f64) -> Result<f64> {
    let tc = TransferConstants::new(radius, r0, r1)?;
    if !(r2 > 0.0) {
        return Err(Error::Domain("observer radius must be positive".into()));
    }
    let (c, m) = (tc.c, tc.m);
    Ok(r2 * (4.0 * c * m.powi(3) + (k + 1.0) * m * m) / (4.0 * tc.r_min) + 1.0)
}

/// Base semiconcavity constant from cone `K` (second part, equal radii):
/// `2 C M + (K − 1) M² / (r_min r2 cos⁴ 𝔇)`.
pub fn cone_transfer_b(k: f64, r0: f64, r1: f64, r2: f64, radius: f64) -> Result<f64> {
    if (r0 - r1).abs() > 1e-12 {
        return Err(Error::InvalidInput("the second transfer needs r0 = r1".into()));
    }
    let tc = TransferConstants::new(radius, r0, r1)?;
    if !(r2 > 0.0) {
        return Err(Error::Domain("observer radius must be positive".into()));
    }
    let (c, m) = (tc.c, tc.m);
    Ok(2.0 * c * m + (k - 1.0) * m * m / (tc.r_min * r2 * radius.cos().powi(4)))
}
