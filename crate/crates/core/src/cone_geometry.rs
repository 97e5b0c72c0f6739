//! The metric cone `𝔠 = Y × [0, ∞) / (Y × {0})` over a base space.
//!
//! Points are written `[x, r]`; every point with `r = 0` is the apex. The
//! cone distance is
//!
//! ```text
//! d_C²([x0, r0], [x1, r1]) = r0² + r1² − 2 r0 r1 cos(min(a, d_Y(x0, x1)))
//! ```
//!
//! with cut-off `a = π` (the standard cone) or `a = π/2`. Internally the
//! equivalent form `(r0 − r1)² + 4 r0 r1 sin²(φ/2)` is used, which does not
//! cancel when the two points are close.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_base::{BaseGeodesic, Curve, Metric};

/// Angle at which the cosine in the cone distance is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Pi,
    HalfPi,
}

impl Cutoff {
    pub fn angle(self) -> f64 {
        match self {
            Cutoff::Pi => PI,
            Cutoff::HalfPi => FRAC_PI_2,
        }
    }
}

/// A point `[x, r]` of the cone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConePoint<P> {
    pub x: P,
    pub r: f64,
}

const APEX_TOL: f64 = 1e-12;

impl<P> ConePoint<P> {
    pub fn new(x: P, r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("cone radius {r} must be finite and nonnegative")));
        }
        Ok(ConePoint { x, r })
    }

    pub fn is_apex(&self) -> bool {
        self.r <= APEX_TOL
    }

    /// The point `c · [x, r] = [x, c r]`.
    pub fn scaled(&self, c: f64) -> Self
    where
        P: Clone,
    {
        ConePoint {
            x: self.x.clone(),
            r: c * self.r,
        }
    }
}

impl<P: PartialEq> PartialEq for ConePoint<P> {
    fn eq(&self, other: &Self) -> bool {
        if self.is_apex() && other.is_apex() {
            return true;
        }
        (self.r - other.r).abs() <= APEX_TOL && self.x == other.x
    }
}

/// `d_C²` for radii `r0, r1` and base distance `phi`.
pub fn cone_distance_sq(r0: f64, r1: f64, phi: f64, cutoff: Cutoff) -> f64 {
    let a = phi.min(cutoff.angle());
    let s = (0.5 * a).sin();
    (r0 - r1) * (r0 - r1) + 4.0 * r0 * r1 * s * s
}

pub fn cone_distance(r0: f64, r1: f64, phi: f64, cutoff: Cutoff) -> f64 {
    cone_distance_sq(r0, r1, phi, cutoff).sqrt()
}

/// The cone over a base metric, optionally with the base distance scaled.
#[derive(Debug, Clone, Copy)]
pub struct ConeMetric<M> {
    pub base: M,
    pub cutoff: Cutoff,
    pub scale: f64,
}

impl<M: Metric> ConeMetric<M> {
    pub fn new(base: M, cutoff: Cutoff) -> Self {
        ConeMetric {
            base,
            cutoff,
            scale: 1.0,
        }
    }

    pub fn distance_sq(&self, a: &ConePoint<M::Point>, b: &ConePoint<M::Point>) -> f64 {
        let phi = if a.is_apex() || b.is_apex() {
            0.0
        } else {
            self.scale * self.base.distance(&a.x, &b.x)
        };
        cone_distance_sq(a.r, b.r, phi, self.cutoff)
    }
}

impl<M: Metric> Metric for ConeMetric<M> {
    type Point = ConePoint<M::Point>;
    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64 {
        self.distance_sq(a, b).sqrt()
    }
}

/// Recovers `d_Y ∧ π` from `D = d_C([x0, 1], [x1, 1])`.
pub fn spherical_from_cone(d: f64) -> Result<f64> {
    let d2 = d * d;
    if !(d2 <= 4.0) {
        return Err(Error::Domain(format!("D² = {d2} exceeds 4")));
    }
    Ok(2.0 * (0.5 * d).asin())
}

/// Residual of the cone scaling identity
/// `d_C²([x0, r0 s0], [x1, r1 s1]) = s0 s1 d_C²(z0, z1) + (s0² − s0 s1) r0² + (s1² − s0 s1) r1²`.
pub fn scaling_identity_residual(r0: f64, r1: f64, phi: f64, s0: f64, s1: f64) -> f64 {
    let lhs = cone_distance_sq(r0 * s0, r1 * s1, phi, Cutoff::Pi);
    let rhs = s0 * s1 * cone_distance_sq(r0, r1, phi, Cutoff::Pi)
        + (s0 * s0 - s0 * s1) * r0 * r0
        + (s1 * s1 - s0 * s1) * r1 * r1;
    lhs - rhs
}

/// How a cone geodesic relates to its base curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `0 < φ < π` with both endpoints off the apex.
    Regular,
    /// Both endpoints over the same base point.
    Radial,
    /// Two radial segments joined at the apex.
    ThroughApex,
}

/// A constant-speed geodesic `z(t) = [γ(ζ(t)), ρ(t)]` in the cone.
#[derive(Debug, Clone)]
pub struct ConeGeodesic<G> {
    base: G,
    phi: f64,
    r0: f64,
    r1: f64,
    shape: Shape,
}

impl<G: Curve> ConeGeodesic<G> {
    /// Geodesic from `[γ(0), r0]` to `[γ(1), r1]`, where `phi` is the base
    /// distance between the endpoints in the cone's own scale.
    ///
    /// Degenerate configurations produce the radial or through-apex curve.
    pub fn connecting(base: G, phi: f64, r0: f64, r1: f64) -> Result<Self> {
        for r in [r0, r1] {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Domain(format!("cone radius {r} must be finite and nonnegative")));
            }
        }
        if !(phi >= 0.0) {
            return Err(Error::Domain(format!("base distance {phi} must be nonnegative")));
        }
        let shape = if r0 == 0.0 || r1 == 0.0 || phi >= PI {
            Shape::ThroughApex
        } else if phi == 0.0 {
            Shape::Radial
        } else {
            Shape::Regular
        };
        Ok(ConeGeodesic {
            base,
            phi: phi.min(PI),
            r0,
            r1,
            shape,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.r0, self.r1)
    }

    pub fn base(&self) -> &G {
        &self.base
    }

    /// `d_C(z0, z1)`, the speed of the curve.
    pub fn length(&self) -> f64 {
        cone_distance(self.r0, self.r1, self.phi, Cutoff::Pi)
    }

    // position in the flat sector spanned by the two endpoint rays
    fn planar(&self, t: f64) -> (f64, f64) {
        let (s, c) = self.phi.sin_cos();
        ((1.0 - t) * self.r0 + t * self.r1 * c, t * self.r1 * s)
    }

    pub fn rho(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Regular => {
                let (a, b) = self.planar(t);
                a.hypot(b)
            }
            Shape::Radial => (1.0 - t) * self.r0 + t * self.r1,
            Shape::ThroughApex => ((1.0 - t) * self.r0 - t * self.r1).abs(),
        }
    }

    pub fn rho_sq(&self, t: f64) -> f64 {
        let r = self.rho(t);
        r * r
    }

    /// Base reparametrization `ζ(t) ∈ [0, 1]`.
    pub fn zeta(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Regular => {
                if t <= 0.0 {
                    return 0.0;
                }
                if t >= 1.0 {
                    return 1.0;
                }
                let (a, b) = self.planar(t);
                (b.atan2(a) / self.phi).clamp(0.0, 1.0)
            }
            Shape::Radial => 0.0,
            Shape::ThroughApex => {
                if (1.0 - t) * self.r0 > t * self.r1 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn at(&self, t: f64) -> ConePoint<G::Point> {
        ConePoint {
            x: self.base.at(self.zeta(t)),
            r: self.rho(t),
        }
    }
}

impl<G: Curve> Curve for ConeGeodesic<G> {
    type Point = ConePoint<G::Point>;
    fn at(&self, t: f64) -> Self::Point {
        ConeGeodesic::at(self, t)
    }
}

/// Lifts a base geodesic with `0 < d_Y < π` to the cone geodesic between
/// `[x0, r0]` and `[x1, r1]`, `r0, r1 > 0`.
///
/// Degenerate endpoint data is rejected; [`ConeGeodesic::connecting`]
/// accepts it and returns the radial curve through the apex instead.
pub fn lift_geodesic(base: BaseGeodesic, r0: f64, r1: f64) -> Result<ConeGeodesic<BaseGeodesic>> {
    let phi = base.length();
    if !(phi > 0.0 && phi < PI) {
        return Err(Error::Degenerate(format!(
            "base distance {phi} outside (0, π); the geodesic runs through the apex"
        )));
    }
    if !(r0 > 0.0 && r1 > 0.0) {
        return Err(Error::Degenerate("an endpoint lies at the apex".into()));
    }
    ConeGeodesic::connecting(base, phi, r0, r1)
}

/// A regular cone geodesic seen through its base: the base curve at
/// constant speed, the inverse reparametrization `σ = ζ⁻¹` and `ρ ∘ σ`.
#[derive(Debug, Clone)]
pub struct ProjectedGeodesic<G> {
    cone: ConeGeodesic<G>,
}

impl<G: Curve> ProjectedGeodesic<G> {
    pub fn base(&self) -> &G {
        self.cone.base()
    }

    pub fn sigma(&self, t: f64) -> f64 {
        let (r0, r1, phi) = (self.cone.r0, self.cone.r1, self.cone.phi);
        let a = r0 * (t * phi).sin();
        a / (r1 * ((1.0 - t) * phi).sin() + a)
    }

    pub fn rho_at_sigma(&self, t: f64) -> f64 {
        let (r0, r1, phi) = (self.cone.r0, self.cone.r1, self.cone.phi);
        r0 * r1 * phi.sin() / (r1 * ((1.0 - t) * phi).sin() + r0 * (t * phi).sin())
    }

    /// The cone point `z(σ(t))`, which sits over the base point `γ(t)`.
    pub fn at(&self, t: f64) -> ConePoint<G::Point> {
        ConePoint {
            x: self.cone.base.at(t),
            r: self.rho_at_sigma(t),
        }
    }
}

pub fn project_geodesic<G: Curve>(g: ConeGeodesic<G>) -> Result<ProjectedGeodesic<G>> {
    if g.shape != Shape::Regular {
        return Err(Error::Degenerate(format!(
            "{:?} geodesics have no base projection",
            g.shape
        )));
    }
    Ok(ProjectedGeodesic { cone: g })
}

/// The curve `t ↦ A(t) · z(B(t))` with `A(t) = s0 + (s1 − s0) t` and
/// `B(t) = s1 t / A(t)`, joining `s0 z0` to `s1 z1`.
#[derive(Debug, Clone)]
pub struct RescaledGeodesic<'a, G> {
    inner: &'a ConeGeodesic<G>,
    s0: f64,
    s1: f64,
}

impl<G: Curve> RescaledGeodesic<'_, G> {
    pub fn a(&self, t: f64) -> f64 {
        self.s0 + (self.s1 - self.s0) * t
    }

    pub fn b(&self, t: f64) -> f64 {
        let a = self.a(t);
        if a == 0.0 {
            0.0
        } else {
            (self.s1 * t / a).clamp(0.0, 1.0)
        }
    }

    pub fn at(&self, t: f64) -> ConePoint<G::Point> {
        self.inner.at(self.b(t)).scaled(self.a(t))
    }
}

impl<G: Curve> Curve for RescaledGeodesic<'_, G> {
    type Point = ConePoint<G::Point>;
    fn at(&self, t: f64) -> Self::Point {
        RescaledGeodesic::at(self, t)
    }
}

pub fn rescale_geodesic<G: Curve>(
    g: &ConeGeodesic<G>,
    s0: f64,
    s1: f64,
) -> Result<RescaledGeodesic<'_, G>> {
    if !(s0 >= 0.0 && s1 >= 0.0) || (s0 == 0.0 && s1 == 0.0) {
        return Err(Error::Domain(format!(
            "scales ({s0}, {s1}) must be nonnegative and not both zero"
        )));
    }
    Ok(RescaledGeodesic { inner: g, s0, s1 })
}

/// Exact minimum of `ρ(t)` over `[0, 1]` for a geodesic whose base angle is
/// at most `phi_max`.
pub fn radius_lower_bound(r0: f64, r1: f64, phi_max: f64) -> f64 {
    let c = phi_max.min(PI).cos();
    // ρ²(t) = a t² + b t + r0²
    let a = r0 * r0 + r1 * r1 - 2.0 * r0 * r1 * c;
    let b = -2.0 * r0 * r0 + 2.0 * r0 * r1 * c;
    let mut best = r0.min(r1);
    if a > 0.0 {
        let t = -b / (2.0 * a);
        if t > 0.0 && t < 1.0 {
            best = best.min((a * t * t + b * t + r0 * r0).max(0.0).sqrt());
        }
    }
    best
}
