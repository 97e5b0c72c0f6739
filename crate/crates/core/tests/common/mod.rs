//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the solver: each oracle is either a closed form, a
//! brute-force minimization, or an embedding into Euclidean space.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use hkcone::let_solver::{DiscreteMeasure, LetProblem};
use hkcone::metric_base::MetricSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `HK²` between `m0 δ_x` and `m1 δ_y` at base distance `d`.
pub fn dirac_hk2(m0: f64, m1: f64, delta: f64, d: f64) -> f64 {
    if delta * d < FRAC_PI_2 {
        m0 + m1 - 2.0 * (m0 * m1).sqrt() * (delta * d).cos()
    } else {
        m0 + m1
    }
}

/// `Σ (√a − √b)²` for weights on a common support.
pub fn hellinger2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum()
}

pub fn line(xs: &[f64]) -> Arc<MetricSpace> {
    Arc::new(MetricSpace::euclidean(xs.iter().map(|&x| vec![x]).collect()).unwrap())
}

pub fn measure(atoms: &[(usize, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect()).unwrap()
}

/// Primal value with a certified lower bound from a feasible dual point.
#[derive(Debug, Clone)]
pub struct LetOracle {
    pub upper: f64,
    pub lower: f64,
    pub plan: Vec<Vec<f64>>,
}

impl LetOracle {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn value(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }
}

struct Instance {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `cos²(δd)` or 0 beyond the cutoff.
    k: Vec<Vec<f64>>,
    /// `−log k`, infinite beyond the cutoff.
    c: Vec<Vec<f64>>,
}

fn entropy(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else {
        s * s.ln() - s + 1.0
    }
}

impl Instance {
    fn new(p: &LetProblem) -> Self {
        let (n0, n1) = (p.mu0.len(), p.mu1.len());
        let mut k = vec![vec![0.0; n1]; n0];
        let mut c = vec![vec![f64::INFINITY; n1]; n0];
        for i in 0..n0 {
            for j in 0..n1 {
                let x = p.delta * p.space.d(p.mu0.support[i], p.mu1.support[j]);
                if x < FRAC_PI_2 {
                    k[i][j] = x.cos().powi(2);
                    c[i][j] = -k[i][j].ln();
                }
            }
        }
        Instance {
            a: p.mu0.weights.clone(),
            b: p.mu1.weights.clone(),
            k,
            c,
        }
    }

    fn marginals(&self, h: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let rows = h.iter().map(|r| r.iter().sum()).collect();
        let mut cols = vec![0.0; self.b.len()];
        for r in h {
            for (j, x) in r.iter().enumerate() {
                cols[j] += x;
            }
        }
        (rows, cols)
    }

    fn objective(&self, h: &[Vec<f64>]) -> f64 {
        let (rows, cols) = self.marginals(h);
        let mut v = 0.0;
        for (i, r) in rows.iter().enumerate() {
            v += self.a[i] * entropy(r / self.a[i]);
        }
        for (j, s) in cols.iter().enumerate() {
            v += self.b[j] * entropy(s / self.b[j]);
        }
        for (i, r) in h.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                if *x > 0.0 {
                    v += x * self.c[i][j];
                }
            }
        }
        v
    }

    fn gradient(&self, h: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (rows, cols) = self.marginals(h);
        let mut g = vec![vec![0.0; self.b.len()]; self.a.len()];
        for i in 0..self.a.len() {
            for j in 0..self.b.len() {
                if self.c[i][j].is_finite() {
                    g[i][j] = (rows[i].max(1e-300) / self.a[i]).ln()
                        + (cols[j].max(1e-300) / self.b[j]).ln()
                        + self.c[i][j];
                }
            }
        }
        g
    }

    /// `Σ a(1 − σ0) + Σ b(1 − τ)` with `τ_j = max_i k_ij / σ0_i`, the dual
    /// value of the feasible potentials `(−log σ0, its c-transform)`.
    fn dual_from_rows(&self, sigma0: &[f64]) -> f64 {
        let mut v: f64 = self.a.iter().zip(sigma0).map(|(a, s)| a * (1.0 - s)).sum();
        for j in 0..self.b.len() {
            let mut tau: f64 = 0.0;
            for i in 0..self.a.len() {
                if self.k[i][j] > 0.0 {
                    tau = tau.max(if sigma0[i] > 0.0 { self.k[i][j] / sigma0[i] } else { f64::INFINITY });
                }
            }
            v += self.b[j] * (1.0 - tau);
        }
        v
    }

    fn lower_bound(&self, h: &[Vec<f64>]) -> f64 {
        let (rows, cols) = self.marginals(h);
        let s0: Vec<f64> = rows.iter().zip(&self.a).map(|(r, a)| r / a).collect();
        let s1: Vec<f64> = cols.iter().zip(&self.b).map(|(s, b)| s / b).collect();
        let swapped = Instance {
            a: self.b.clone(),
            b: self.a.clone(),
            k: transpose(&self.k),
            c: transpose(&self.c),
        };
        self.dual_from_rows(&s0).max(swapped.dual_from_rows(&s1))
    }
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect()
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x * y).sum()
}

/// Brute-force LET minimizer: projected gradient with Armijo backtracking
/// and Barzilai–Borwein trial steps, restarted from several initial plans.
pub fn let_oracle(p: &LetProblem) -> LetOracle {
    let inst = Instance::new(p);
    let (n0, n1) = (inst.a.len(), inst.b.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut starts = Vec::new();
    let mut geometric = vec![vec![0.0; n1]; n0];
    for i in 0..n0 {
        for j in 0..n1 {
            geometric[i][j] = (inst.a[i] * inst.b[j]).sqrt() * inst.k[i][j].sqrt() / n0.max(n1) as f64;
        }
    }
    starts.push(geometric);
    for _ in 0..2 {
        starts.push(
            (0..n0)
                .map(|i| (0..n1).map(|j| if inst.k[i][j] > 0.0 { rng.gen_range(0.0..1.0) } else { 0.0 }).collect())
                .collect(),
        );
    }
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let coarse = 1e-3 * inst.a.iter().chain(&inst.b).fold(f64::INFINITY, |m, x| m.min(*x));
    for h0 in starts {
        let h = descend(&inst, descend(&inst, h0, coarse), 1e-300);
        let v = inst.objective(&h);
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, h));
        }
    }
    let (upper, plan) = best.unwrap();
    LetOracle {
        upper,
        lower: inst.lower_bound(&plan),
        plan,
    }
}

/// Inverse diagonal of the Hessian, `1 / (1/η0_i + 1/η1_j)`, with marginals floored
/// so that atoms near zero can still move.
fn diagonal_scale(inst: &Instance, h: &[Vec<f64>], floor: f64) -> Vec<Vec<f64>> {
    let (rows, cols) = inst.marginals(h);
    (0..inst.a.len())
        .map(|i| {
            (0..inst.b.len())
                .map(|j| 1.0 / (1.0 / rows[i].max(floor) + 1.0 / cols[j].max(floor)))
                .collect()
        })
        .collect()
}

fn descend(inst: &Instance, mut h: Vec<Vec<f64>>, floor: f64) -> Vec<Vec<f64>> {
    let project = |h: &[Vec<f64>], dir: &[Vec<f64>], step: f64| -> Vec<Vec<f64>> {
        (0..h.len())
            .map(|i| {
                (0..h[i].len())
                    .map(|j| if inst.k[i][j] > 0.0 { (h[i][j] - step * dir[i][j]).max(0.0) } else { 0.0 })
                    .collect()
            })
            .collect()
    };
    let mut f = inst.objective(&h);
    let mut g = inst.gradient(&h);
    let mut step: f64 = 1.0;
    for it in 0..200_000 {
        let scale = diagonal_scale(inst, &h, floor);
        let dir: Vec<Vec<f64>> = g
            .iter()
            .zip(&scale)
            .map(|(gr, sr)| gr.iter().zip(sr).map(|(x, s)| x * s).collect())
            .collect();
        let mut trial = step;
        let (hn, fnew) = loop {
            let hn = project(&h, &dir, trial);
            let diff: Vec<Vec<f64>> = hn
                .iter()
                .zip(&h)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            let fnew = inst.objective(&hn);
            if fnew <= f + 1e-4 * dot(&g, &diff) || trial < 1e-18 {
                break (hn, fnew);
            }
            trial *= 0.5;
        };
        let gn = inst.gradient(&hn);
        let s: Vec<f64> = hn.iter().flatten().zip(h.iter().flatten()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().flatten().zip(g.iter().flatten()).map(|(a, b)| a - b).collect();
        let sds: f64 = s
            .iter()
            .zip(scale.iter().flatten())
            .map(|(x, d)| if *d > 0.0 { x * x / d } else { 0.0 })
            .sum();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        step = if sy > 0.0 { (sds / sy).clamp(1e-8, 1e2) } else { (trial * 2.0).min(1e2) };
        let done = s.iter().all(|x| *x == 0.0);
        h = hn;
        f = fnew;
        g = gn;
        if done || (it % 16 == 0 && f - inst.lower_bound(&h) < 1e-12) {
            break;
        }
    }
    h
}

/// `W₂²` between equal-mass measures by enumerating the vertices of the
/// transport polytope.
pub fn w2_squared_vertices(d: impl Fn(usize, usize) -> f64, a: &[f64], b: &[f64]) -> f64 {
    let (n0, n1) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..n0).flat_map(|i| (0..n1).map(move |j| (i, j))).collect();
    let k = n0 + n1 - 1;
    let mut rhs: Vec<f64> = a.to_vec();
    rhs.extend_from_slice(&b[..n1 - 1]);
    let mut best = f64::INFINITY;
    for basis in subsets(cells.len(), k) {
        let mut m = vec![vec![0.0; k + 1]; k];
        for (col, &cell) in basis.iter().enumerate() {
            let (i, j) = cells[cell];
            m[i][col] = 1.0;
            if j < n1 - 1 {
                m[n0 + j][col] = 1.0;
            }
        }
        for (r, row) in m.iter_mut().enumerate() {
            row[k] = rhs[r];
        }
        let Some(x) = gauss(m) else { continue };
        if x.iter().all(|&v| v >= -1e-12) {
            let cost: f64 = basis
                .iter()
                .zip(&x)
                .map(|(&cell, &v)| {
                    let (i, j) = cells[cell];
                    v.max(0.0) * d(i, j).powi(2)
                })
                .sum();
            best = best.min(cost);
        }
    }
    best
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in start..n {
            cur.push(s);
            rec(s + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Solves a square augmented system, `None` if singular.
fn gauss(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|r| m[r][n] / m[r][r]).collect())
}

/// `W₂²` on the line from quantile functions.
pub fn w2_squared_line(x0: &[f64], a: &[f64], x1: &[f64], b: &[f64]) -> f64 {
    let sorted = |x: &[f64], w: &[f64]| {
        let mut v: Vec<(f64, f64)> = x.iter().copied().zip(w.iter().copied()).collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        v
    };
    let (p, q) = (sorted(x0, a), sorted(x1, b));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (p[0].1, q[0].1);
    let mut total = 0.0;
    while i < p.len() && j < q.len() {
        let m = ra.min(rb);
        total += m * (p[i].0 - q[j].0).powi(2);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i < p.len() {
                ra = p[i].1;
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < q.len() {
                rb = q[j].1;
            }
        }
    }
    total
}

/// Euclidean embedding of the cone over a circle: `[θ, r] ↦ r (cos θ, sin θ)`.
pub fn plane_embed(theta: f64, r: f64) -> [f64; 2] {
    [r * theta.cos(), r * theta.sin()]
}

/// Euclidean embedding of the cone over the unit sphere: `[x, r] ↦ r x`.
pub fn space_embed(x: &[f64], r: f64) -> [f64; 3] {
    [r * x[0], r * x[1], r * x[2]]
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Angle between two vectors.
pub fn vector_angle(u: &[f64], v: &[f64]) -> f64 {
    let c: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() / (norm(u) * norm(v));
    c.clamp(-1.0, 1.0).acos()
}
