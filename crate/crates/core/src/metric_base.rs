//! Finite base spaces `(X, d_X)`.
//!
//! A [`MetricSpace`] stores its points together with a dense distance matrix.
//! Euclidean point clouds, the circle of circumference `2π` and the unit
//! sphere `S²` also carry an analytic [`Model`], which provides exact
//! constant-speed geodesics through [`BaseGeodesic`]. Graphs and explicit
//! distance matrices expose distances only.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Coordinates of a point in an analytic model.
///
/// Euclidean points use their Cartesian coordinates, circle points a single
/// angle in `[0, 2π)` and sphere points a unit vector in `R³`.
pub type Point = Vec<f64>;

/// A distance function on some point type.
pub trait Metric {
    type Point: Clone;
    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;
}

/// A curve parametrized over `[0, 1]`.
pub trait Curve {
    type Point: Clone;
    fn at(&self, t: f64) -> Self::Point;
}

impl<P: Clone, F: Fn(f64) -> P> Curve for F {
    type Point = P;
    fn at(&self, t: f64) -> P {
        self(t)
    }
}

/// Geometries with closed-form distances and geodesics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Euclidean,
    Circle,
    Sphere,
}

/// The kind of a [`MetricSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean,
    Circle,
    Sphere,
    Graph,
    Matrix,
}

impl SpaceKind {
    pub fn model(self) -> Option<Model> {
        match self {
            SpaceKind::Euclidean => Some(Model::Euclidean),
            SpaceKind::Circle => Some(Model::Circle),
            SpaceKind::Sphere => Some(Model::Sphere),
            SpaceKind::Graph | SpaceKind::Matrix => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Euclidean => "euclidean",
            SpaceKind::Circle => "circle",
            SpaceKind::Sphere => "sphere",
            SpaceKind::Graph => "graph",
            SpaceKind::Matrix => "matrix",
        }
    }
}

impl From<Model> for SpaceKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Euclidean => SpaceKind::Euclidean,
            Model::Circle => SpaceKind::Circle,
            Model::Sphere => SpaceKind::Sphere,
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Signed shortest angular displacement from `a` to `b`, in `(-π, π]`.
fn circle_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a).rem_euclid(2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Model {
    /// Distance between two points given by coordinates.
    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Model::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Model::Circle => circle_delta(a[0], b[0]).abs(),
            Model::Sphere => norm(&cross(a, b)).atan2(dot(a, b)),
        }
    }

    /// Validates and normalizes a coordinate vector for this model.
    pub fn normalize(self, p: &[f64], dim: Option<usize>) -> Result<Point> {
        if p.iter().any(|x| !x.is_finite()) {
            return invalid("point coordinates must be finite");
        }
        match self {
            Model::Euclidean => {
                if p.is_empty() {
                    return invalid("euclidean points need at least one coordinate");
                }
                if let Some(d) = dim {
                    if p.len() != d {
                        return invalid(format!("expected {d} coordinates, got {}", p.len()));
                    }
                }
                Ok(p.to_vec())
            }
            Model::Circle => {
                if p.len() != 1 {
                    return invalid("circle points are single angles");
                }
                Ok(vec![wrap_angle(p[0])])
            }
            Model::Sphere => {
                if p.len() != 3 {
                    return invalid("sphere points are vectors in R^3");
                }
                let n = norm(p);
                if n < 1e-300 {
                    return invalid("sphere point must be nonzero");
                }
                Ok(p.iter().map(|x| x / n).collect())
            }
        }
    }

    /// Constant-speed geodesic from `a` to `b`.
    pub fn geodesic(self, a: &[f64], b: &[f64]) -> Result<BaseGeodesic> {
        BaseGeodesic::new(self, a.to_vec(), b.to_vec())
    }
}

impl Metric for Model {
    type Point = Point;
    fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.dist(a, b)
    }
}

/// A constant-speed geodesic in an analytic model.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseGeodesic {
    model: Model,
    start: Point,
    end: Point,
    length: f64,
    // unit tangent at the start (sphere) or signed displacement (circle)
    aux: Point,
}

impl BaseGeodesic {
    pub fn new(model: Model, start: Point, end: Point) -> Result<Self> {
        let length = model.dist(&start, &end);
        let aux = match model {
            Model::Euclidean => {
                if start.len() != end.len() {
                    return invalid("endpoints have different dimensions");
                }
                end.iter().zip(&start).map(|(b, a)| b - a).collect()
            }
            Model::Circle => {
                let d = circle_delta(start[0], end[0]);
                if (d.abs() - PI).abs() < 1e-12 {
                    return Err(Error::Antipodal);
                }
                vec![d]
            }
            Model::Sphere => {
                if PI - length < 1e-9 {
                    return Err(Error::Antipodal);
                }
                let c = dot(&start, &end);
                let u: Vec<f64> = end.iter().zip(&start).map(|(b, a)| b - c * a).collect();
                let n = norm(&u);
                if n > 0.0 {
                    u.iter().map(|x| x / n).collect()
                } else {
                    vec![0.0; 3]
                }
            }
        };
        Ok(BaseGeodesic {
            model,
            start,
            end,
            length,
            aux,
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn start(&self) -> &Point {
        &self.start
    }

    pub fn end(&self) -> &Point {
        &self.end
    }

    /// Length, which is also the speed on `[0, 1]`.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn at(&self, t: f64) -> Point {
        if t == 0.0 {
            return self.start.clone();
        }
        if t == 1.0 {
            return self.end.clone();
        }
        match self.model {
            Model::Euclidean => self
                .start
                .iter()
                .zip(&self.aux)
                .map(|(a, d)| a + t * d)
                .collect(),
            Model::Circle => vec![wrap_angle(self.start[0] + t * self.aux[0])],
            Model::Sphere => {
                let (s, c) = (t * self.length).sin_cos();
                let p: Vec<f64> = self
                    .start
                    .iter()
                    .zip(&self.aux)
                    .map(|(a, u)| c * a + s * u)
                    .collect();
                let n = norm(&p);
                p.iter().map(|x| x / n).collect()
            }
        }
    }

    /// The same geodesic restricted to `[t1, t2]` and reparametrized over `[0, 1]`.
    pub fn restrict(&self, t1: f64, t2: f64) -> Result<BaseGeodesic> {
        BaseGeodesic::new(self.model, self.at(t1), self.at(t2))
    }
}

impl Curve for BaseGeodesic {
    type Point = Point;
    fn at(&self, t: f64) -> Point {
        BaseGeodesic::at(self, t)
    }
}

/// Coordinates or label of one point in a [`SpaceDescriptor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Angle(f64),
    Coords(Vec<f64>),
    Label(String),
}

/// JSON form of a space: `{"kind": ..., "points": [...], "edges": [...]}`.
///
/// Graphs list weighted edges `[i, j, w]`; `matrix` spaces give `dist` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<f64>>>,
}

/// A finite metric space with a dense distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    kind: SpaceKind,
    points: Vec<Point>,
    dist: Vec<f64>,
    n: usize,
}

impl MetricSpace {
    /// Builds a space from model coordinates. Coincident points are rejected.
    pub fn from_points(model: Model, points: Vec<Point>) -> Result<Self> {
        let dim = match model {
            Model::Euclidean => points.first().map(|p| p.len()),
            _ => None,
        };
        let points = points
            .iter()
            .map(|p| model.normalize(p, dim))
            .collect::<Result<Vec<_>>>()?;
        let n = points.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = model.dist(&points[i], &points[j]);
                if d == 0.0 {
                    return invalid(format!("points {i} and {j} coincide"));
                }
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(MetricSpace {
            kind: model.into(),
            points,
            dist,
            n,
        })
    }

    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_points(Model::Euclidean, points)
    }

    pub fn circle(angles: &[f64]) -> Result<Self> {
        Self::from_points(Model::Circle, angles.iter().map(|&a| vec![a]).collect())
    }

    pub fn sphere(points: &[[f64; 3]]) -> Result<Self> {
        Self::from_points(Model::Sphere, points.iter().map(|p| p.to_vec()).collect())
    }

    /// Shortest-path metric of a connected weighted graph on `n` nodes.
    pub fn graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut dist = vec![f64::INFINITY; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::UnknownPoint {
                    index: i.max(j),
                    len: n,
                });
            }
            if i == j || !(w > 0.0) || !w.is_finite() {
                return invalid(format!("edge ({i}, {j}) needs distinct ends and positive weight"));
            }
            let k = i * n + j;
            dist[k] = dist[k].min(w);
            dist[j * n + i] = dist[k];
        }
        for k in 0..n {
            for i in 0..n {
                let dik = dist[i * n + k];
                if dik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let through = dik + dist[k * n + j];
                    if through < dist[i * n + j] {
                        dist[i * n + j] = through;
                    }
                }
            }
        }
        if dist.iter().any(|d| d.is_infinite()) {
            return invalid("graph is disconnected");
        }
        Ok(MetricSpace {
            kind: SpaceKind::Graph,
            points: (0..n).map(|i| vec![i as f64]).collect(),
            dist,
            n,
        })
    }

    /// Wraps an explicit distance matrix.
    ///
    /// Shape, symmetry, positivity and the zero diagonal are checked; the
    /// triangle inequality is not (see [`MetricSpace::triangle_violation`]).
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return invalid("distance matrix must be square");
            }
            for (j, &d) in row.iter().enumerate() {
                if !d.is_finite() || d < 0.0 {
                    return invalid(format!("entry ({i}, {j}) is not a finite nonnegative number"));
                }
                if (i == j) != (d == 0.0) {
                    return invalid(format!("entry ({i}, {j}) violates zero-exactly-on-diagonal"));
                }
                dist.push(d);
            }
        }
        for i in 0..n {
            for j in 0..i {
                if dist[i * n + j] != dist[j * n + i] {
                    return invalid(format!("matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(MetricSpace {
            kind: SpaceKind::Matrix,
            points: (0..n).map(|i| vec![i as f64]).collect(),
            dist,
            n,
        })
    }

    pub fn from_descriptor(desc: &SpaceDescriptor) -> Result<Self> {
        let coords = |p: &PointSpec| -> Result<Point> {
            match p {
                PointSpec::Angle(a) => Ok(vec![*a]),
                PointSpec::Coords(c) => Ok(c.clone()),
                PointSpec::Label(l) => invalid(format!("label {l:?} is not a coordinate point")),
            }
        };
        match desc.kind {
            SpaceKind::Graph => Self::graph(desc.points.len(), &desc.edges),
            SpaceKind::Matrix => match &desc.dist {
                Some(rows) => {
                    if !desc.points.is_empty() && desc.points.len() != rows.len() {
                        return invalid("points and dist sizes differ");
                    }
                    Self::from_matrix(rows)
                }
                None => invalid("matrix spaces need a dist field"),
            },
            kind => {
                let pts = desc.points.iter().map(coords).collect::<Result<Vec<_>>>()?;
                Self::from_points(kind.model().expect("analytic kind"), pts)
            }
        }
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        let mut desc = SpaceDescriptor {
            kind: self.kind,
            points: Vec::new(),
            edges: Vec::new(),
            dist: None,
        };
        match self.kind {
            SpaceKind::Circle => {
                desc.points = self.points.iter().map(|p| PointSpec::Angle(p[0])).collect()
            }
            SpaceKind::Euclidean | SpaceKind::Sphere => {
                desc.points = self.points.iter().map(|p| PointSpec::Coords(p.clone())).collect()
            }
            SpaceKind::Graph | SpaceKind::Matrix => {
                desc.points = (0..self.n).map(|i| PointSpec::Label(i.to_string())).collect();
                desc.dist = Some(
                    (0..self.n)
                        .map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec())
                        .collect(),
                );
                desc.kind = SpaceKind::Matrix;
            }
        }
        desc
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn model(&self) -> Option<Model> {
        self.kind.model()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::UnknownPoint {
                index: i,
                len: self.n,
            })
        }
    }

    /// Model coordinates of point `i` (node index for graphs).
    pub fn point(&self, i: usize) -> Result<&Point> {
        self.check(i)?;
        Ok(&self.points[i])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.d(i, j))
    }

    /// Unchecked distance lookup; panics on a bad index.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    /// Distance from point `i` to arbitrary model coordinates.
    pub fn distance_to(&self, i: usize, p: &[f64]) -> Result<f64> {
        let model = self.model().ok_or(Error::NoInterpolation(self.kind.name()))?;
        Ok(model.dist(self.point(i)?, p))
    }

    pub fn geodesic(&self, i: usize, j: usize) -> Result<BaseGeodesic> {
        let model = self.model().ok_or(Error::NoInterpolation(self.kind.name()))?;
        BaseGeodesic::new(model, self.point(i)?.clone(), self.point(j)?.clone())
    }

    pub fn interpolate(&self, i: usize, j: usize, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        Ok(self.geodesic(i, j)?.at(t))
    }

    /// Indices of the open ball `B(x_i, r)`.
    pub fn ball(&self, i: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&j| self.d(i, j) < r).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `d(i,k) − d(i,j) − d(j,k)` over all triples, with the triple.
    pub fn triangle_violation(&self) -> (f64, [usize; 3]) {
        let mut worst = (f64::NEG_INFINITY, [0; 3]);
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    let v = self.d(i, k) - self.d(i, j) - self.d(j, k);
                    if v > worst.0 {
                        worst = (v, [i, j, k]);
                    }
                }
            }
        }
        worst
    }
}

impl Metric for MetricSpace {
    type Point = usize;
    fn distance(&self, a: &usize, b: &usize) -> f64 {
        self.d(*a, *b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pythagorean_distance() {
        let s = MetricSpace::euclidean(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.distance(0, 1).unwrap(), 5.0);
        assert_eq!(s.distance(1, 1).unwrap(), 0.0);
        assert!(matches!(s.distance(0, 2), Err(Error::UnknownPoint { .. })));
    }

    #[test]
    fn pole_to_equator_is_quarter_circle() {
        let s = MetricSpace::sphere(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!((s.distance(0, 1).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn circle_arc_midpoint() {
        let s = MetricSpace::circle(&[0.0, PI / 2.0]).unwrap();
        let m = s.interpolate(0, 1, 0.5).unwrap();
        assert!((Model::Circle.dist(&m, &[0.0]) - PI / 4.0).abs() < 1e-15);
        assert!((Model::Circle.dist(&m, &[PI / 2.0]) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn circle_wraps_through_zero() {
        let s = MetricSpace::circle(&[0.1, 2.0 * PI - 0.1]).unwrap();
        assert!((s.d(0, 1) - 0.2).abs() < 1e-14);
        let m = s.interpolate(0, 1, 0.5).unwrap();
        assert!(Model::Circle.dist(&m, &[0.0]) < 1e-14);
    }

    #[test]
    fn euclidean_midpoint_and_endpoints() {
        let s = MetricSpace::euclidean(vec![vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(s.interpolate(0, 1, 0.5).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.interpolate(0, 1, 0.0).unwrap(), vec![0.0, 0.0]);
        assert!(s.interpolate(0, 1, 1.5).is_err());
    }

    #[test]
    fn antipodes_are_rejected() {
        let s = MetricSpace::sphere(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
        assert_eq!(s.geodesic(0, 1).unwrap_err(), Error::Antipodal);
        let c = MetricSpace::circle(&[0.0, PI]).unwrap();
        assert_eq!(c.geodesic(0, 1).unwrap_err(), Error::Antipodal);
    }

    #[test]
    fn graphs_have_no_geodesics() {
        let g = MetricSpace::graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(g.d(0, 2), 3.0);
        assert!(matches!(g.interpolate(0, 2, 0.5), Err(Error::NoInterpolation(_))));
        assert!(MetricSpace::graph(3, &[(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn coincident_points_rejected() {
        assert!(MetricSpace::euclidean(vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn matrix_triangle_violation_is_reported() {
        let m = MetricSpace::from_matrix(&[
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ])
        .unwrap();
        let (v, _) = m.triangle_violation();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn descriptor_round_trip() {
        let s = MetricSpace::sphere(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        let back = MetricSpace::from_descriptor(&s.descriptor()).unwrap();
        assert_eq!(s, back);
        let g = MetricSpace::graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let back = MetricSpace::from_descriptor(&g.descriptor()).unwrap();
        assert_eq!(back.d(0, 2), 3.0);
    }

    #[test]
    fn small_sphere_arcs_are_accurate() {
        let a = [1.0, 0.0, 0.0];
        let b = [1.0, 1e-8, 0.0];
        let d = Model::Sphere.dist(&a, &Model::Sphere.normalize(&b, None).unwrap());
        assert!((d - 1e-8).abs() < 1e-20);
    }
}
