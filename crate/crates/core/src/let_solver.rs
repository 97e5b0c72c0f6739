//! The logarithmic entropy-transport (LET) problem.
//!
//! For measures `μ0, μ1` on a finite space and a length scale `δ > 0`,
//!
//! ```text
//! LET(H) = Σ μ0 F(σ0) + Σ μ1 F(σ1) + Σ L_δ(d) H,   F(r) = r log r − r + 1,
//! ```
//!
//! where `σi` are the densities of the marginals of the plan `H` and
//! `L_δ(R) = −2 log cos(Rδ)` for `Rδ < π/2` (`+∞` beyond). Its minimum is
//! `HK_δ²(μ0, μ1)`.
//!
//! # Algorithm
//!
//! Atoms farther than `π/(2δ)` from the other support never move mass and
//! are split off first. On the remaining couple the solver runs
//! log-domain scaling iterations for the entropically regularized problem
//! (reference measure `μ0 ⊗ μ1`) along `ε = 1, 1/10, …, tol`, polishing each
//! level with damped Newton steps on the two dual potentials. At every level
//! it also tries to read off the support of the plan and solve the
//! unregularized optimality system on a spanning forest of it; a candidate
//! that passes both primal feasibility (`H ≥ 0`) and dual feasibility
//! (`σ0 σ1 ≥ cos²(δd)` on all pairs) is optimal and ends the run.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric_base::{MetricSpace, SpaceDescriptor};

/// `L_δ(R) = −2 log cos(Rδ)` for `Rδ < π/2`, else `+∞`.
pub fn cost(delta: f64, r: f64) -> f64 {
    let a = r * delta;
    if a < FRAC_PI_2 {
        -2.0 * a.cos().ln()
    } else {
        f64::INFINITY
    }
}

/// `cos²(min(π/2, Rδ))`.
pub fn cos2_cut(delta: f64, r: f64) -> f64 {
    let a = r * delta;
    if a < FRAC_PI_2 {
        a.cos().powi(2)
    } else {
        0.0
    }
}

/// `F(r) = r log r − r + 1` with `F(0) = 1`.
pub fn entropy_density(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        r * r.ln() - r + 1.0
    }
}

/// Nonnegative weights on distinct points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let m = DiscreteMeasure { support, weights };
        m.check_shape()?;
        Ok(m)
    }

    pub fn empty() -> Self {
        DiscreteMeasure {
            support: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn dirac(point: usize, weight: f64) -> Result<Self> {
        Self::new(vec![point], vec![weight])
    }

    fn check_shape(&self) -> Result<()> {
        if self.support.len() != self.weights.len() {
            return invalid("support and weights differ in length");
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return invalid(format!("weight {w} is not a positive finite number"));
        }
        let mut s = self.support.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return invalid("support points must be distinct");
        }
        Ok(())
    }

    /// Checks the weights and that every support index lies in `space`.
    pub fn validate(&self, space: &MetricSpace) -> Result<()> {
        self.check_shape()?;
        match self.support.iter().find(|&&i| i >= space.len()) {
            Some(&index) => Err(Error::UnknownPoint {
                index,
                len: space.len(),
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `c · μ`; the zero measure when `c = 0`.
    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::empty();
        }
        DiscreteMeasure {
            support: self.support.clone(),
            weights: self.weights.iter().map(|w| c * w).collect(),
        }
    }

    /// `μ / μ(X)`.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return invalid("cannot normalize the zero measure");
        }
        Ok(self.scaled(1.0 / m))
    }

    /// Atoms `k` with `keep[k]`.
    pub fn restrict(&self, keep: &[bool]) -> Self {
        let (support, weights) = self
            .support
            .iter()
            .zip(&self.weights)
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|((&s, &w), _)| (s, w))
            .unzip();
        DiscreteMeasure { support, weights }
    }

    /// Weight at space point `x`, zero off the support.
    pub fn weight_at(&self, x: usize) -> f64 {
        self.support
            .iter()
            .position(|&s| s == x)
            .map_or(0.0, |k| self.weights[k])
    }
}

/// Two measures on a common space and the length scale `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LetProblem {
    pub space: Arc<MetricSpace>,
    pub mu0: DiscreteMeasure,
    pub mu1: DiscreteMeasure,
    pub delta: f64,
}

impl LetProblem {
    pub fn new(
        space: Arc<MetricSpace>,
        mu0: DiscreteMeasure,
        mu1: DiscreteMeasure,
        delta: f64,
    ) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return invalid(format!("delta = {delta} must be positive and finite"));
        }
        mu0.validate(&space)?;
        mu1.validate(&space)?;
        Ok(LetProblem {
            space,
            mu0,
            mu1,
            delta,
        })
    }

    /// Base distance between atom `i` of `μ0` and atom `j` of `μ1`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.space.d(self.mu0.support[i], self.mu1.support[j])
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        cost(self.delta, self.distance(i, j))
    }

    /// `(μ1, μ0)`.
    pub fn swapped(&self) -> Self {
        LetProblem {
            space: self.space.clone(),
            mu0: self.mu1.clone(),
            mu1: self.mu0.clone(),
            delta: self.delta,
        }
    }

    /// `(c0 μ0, c1 μ1)`.
    pub fn scaled(&self, c0: f64, c1: f64) -> Self {
        LetProblem {
            space: self.space.clone(),
            mu0: self.mu0.scaled(c0),
            mu1: self.mu1.scaled(c1),
            delta: self.delta,
        }
    }

    pub fn from_file(file: &ProblemFile) -> Result<Self> {
        let space = MetricSpace::from_descriptor(&file.space)?;
        Self::new(Arc::new(space), file.mu0.clone(), file.mu1.clone(), file.delta)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            space: self.space.descriptor(),
            mu0: self.mu0.clone(),
            mu1: self.mu1.clone(),
            delta: self.delta,
        }
    }
}

/// JSON form of a [`LetProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub space: SpaceDescriptor,
    pub mu0: DiscreteMeasure,
    pub mu1: DiscreteMeasure,
    pub delta: f64,
}

/// `LET(H)` for an arbitrary nonnegative plan; `+∞` if `H` charges a pair
/// at infinite cost.
pub fn let_functional(p: &LetProblem, plan: &[Vec<f64>]) -> f64 {
    let mut value = 0.0;
    let mut cols = vec![0.0; p.mu1.len()];
    for (i, row) in plan.iter().enumerate() {
        let mut eta = 0.0;
        for (j, &h) in row.iter().enumerate() {
            if h > 0.0 {
                let c = p.cost(i, j);
                if c.is_infinite() {
                    return f64::INFINITY;
                }
                value += c * h;
            }
            eta += h;
            cols[j] += h;
        }
        value += p.mu0.weights[i] * entropy_density(eta / p.mu0.weights[i]);
    }
    for (j, eta) in cols.iter().enumerate() {
        value += p.mu1.weights[j] * entropy_density(eta / p.mu1.weights[j]);
    }
    value
}

/// Solver settings. `tol` is the target absolute accuracy of the value
/// and the smallest regularization level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub eps_start: f64,
    pub eps_factor: f64,
    pub max_sweeps: usize,
    pub max_newton: usize,
    pub snap: bool,
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Self::default()
        }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            eps_start: 1.0,
            eps_factor: 10.0,
            max_sweeps: 30,
            max_newton: 100,
            snap: true,
        }
    }
}

/// Per-level solver log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLog {
    pub eps: f64,
    pub sweeps: usize,
    pub newton_steps: usize,
    /// `Σ |∂D|`, the marginal mismatch of the regularized optimality system.
    pub residual: f64,
    /// `LET` of the regularized plan.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub levels: Vec<LevelLog>,
    pub final_eps: f64,
    pub iterations: usize,
    /// `LET` of the last regularized plan.
    pub raw_value: f64,
    /// Richardson extrapolation of the last two levels, for comparison only.
    pub extrapolated_value: f64,
    /// Whether the exact support solve succeeded.
    pub exact: bool,
}

/// Optimal plan, calibration densities and `HK_δ²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LetSolution {
    #[serde(skip)]
    pub problem: LetProblem,
    pub plan: Vec<Vec<f64>>,
    pub sigma0: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub value: f64,
    pub diagnostics: Diagnostics,
}

impl LetSolution {
    /// `H(X × X)`.
    pub fn transported(&self) -> f64 {
        self.plan.iter().flatten().sum()
    }

    /// Row sums `η0`.
    pub fn eta0(&self) -> Vec<f64> {
        self.plan.iter().map(|r| r.iter().sum()).collect()
    }

    /// Column sums `η1`.
    pub fn eta1(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.problem.mu1.len()];
        for row in &self.plan {
            for (j, h) in row.iter().enumerate() {
                out[j] += h;
            }
        }
        out
    }
}

fn lse(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

// the couple restricted to atoms with at least one finite-cost partner
struct Core {
    rows: Vec<usize>,
    cols: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    la: Vec<f64>,
    lb: Vec<f64>,
    cost: Vec<f64>,
    nr: usize,
    nc: usize,
}

struct State {
    plan: Vec<f64>,
    eta0: Vec<f64>,
    eta1: Vec<f64>,
    grad: Vec<f64>,
    residual: f64,
}

impl Core {
    fn new(p: &LetProblem) -> Core {
        let (n0, n1) = (p.mu0.len(), p.mu1.len());
        let rows: Vec<usize> = (0..n0)
            .filter(|&i| (0..n1).any(|j| p.cost(i, j).is_finite()))
            .collect();
        let cols: Vec<usize> = (0..n1)
            .filter(|&j| (0..n0).any(|i| p.cost(i, j).is_finite()))
            .collect();
        let mut cost = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            for &j in &cols {
                cost.push(p.cost(i, j));
            }
        }
        let a: Vec<f64> = rows.iter().map(|&i| p.mu0.weights[i]).collect();
        let b: Vec<f64> = cols.iter().map(|&j| p.mu1.weights[j]).collect();
        Core {
            la: a.iter().map(|x| x.ln()).collect(),
            lb: b.iter().map(|x| x.ln()).collect(),
            nr: rows.len(),
            nc: cols.len(),
            rows,
            cols,
            a,
            b,
            cost,
        }
    }

    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.nc + j]
    }

    fn sweep(&self, f: &mut [f64], g: &mut [f64], eps: f64) {
        let k = eps / (1.0 + eps);
        for i in 0..self.nr {
            let s = lse((0..self.nc).map(|j| self.lb[j] + (g[j] - self.c(i, j)) / eps));
            f[i] = -k * s;
        }
        for j in 0..self.nc {
            let s = lse((0..self.nr).map(|i| self.la[i] + (f[i] - self.c(i, j)) / eps));
            g[j] = -k * s;
        }
    }

    fn state(&self, f: &[f64], g: &[f64], eps: f64) -> State {
        let mut plan = vec![0.0; self.nr * self.nc];
        let mut eta0 = vec![0.0; self.nr];
        let mut eta1 = vec![0.0; self.nc];
        for i in 0..self.nr {
            for j in 0..self.nc {
                let c = self.c(i, j);
                if c.is_finite() {
                    let h = (self.la[i] + self.lb[j] + (f[i] + g[j] - c) / eps).exp();
                    plan[i * self.nc + j] = h;
                    eta0[i] += h;
                    eta1[j] += h;
                }
            }
        }
        let mut grad = Vec::with_capacity(self.nr + self.nc);
        grad.extend((0..self.nr).map(|i| self.a[i] * (-f[i]).exp() - eta0[i]));
        grad.extend((0..self.nc).map(|j| self.b[j] * (-g[j]).exp() - eta1[j]));
        let residual = grad.iter().map(|x| x.abs()).sum();
        State {
            plan,
            eta0,
            eta1,
            grad,
            residual,
        }
    }

    // concave dual of the regularized problem (up to a constant)
    fn dual(&self, f: &[f64], g: &[f64], eps: f64) -> f64 {
        let mut d = 0.0;
        for i in 0..self.nr {
            d -= self.a[i] * (-f[i]).exp();
        }
        for j in 0..self.nc {
            d -= self.b[j] * (-g[j]).exp();
        }
        let mut h = 0.0;
        for i in 0..self.nr {
            for j in 0..self.nc {
                let c = self.c(i, j);
                if c.is_finite() {
                    h += (self.la[i] + self.lb[j] + (f[i] + g[j] - c) / eps).exp();
                }
            }
        }
        let v = d - eps * h;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn newton(&self, f: &mut [f64], g: &mut [f64], eps: f64, max_steps: usize, gtol: f64) -> usize {
        let n = self.nr + self.nc;
        let mut steps = 0;
        let mut st = self.state(f, g, eps);
        let mut best = st.residual;
        let mut stalled = 0;
        while steps < max_steps && st.residual > gtol && stalled < 4 {
            let mut a = DMatrix::<f64>::zeros(n, n);
            for i in 0..self.nr {
                a[(i, i)] = eps * self.a[i] * (-f[i]).exp() + st.eta0[i];
            }
            for j in 0..self.nc {
                a[(self.nr + j, self.nr + j)] = eps * self.b[j] * (-g[j]).exp() + st.eta1[j];
            }
            for i in 0..self.nr {
                for j in 0..self.nc {
                    let h = st.plan[i * self.nc + j];
                    a[(i, self.nr + j)] = h;
                    a[(self.nr + j, i)] = h;
                }
            }
            let scale: Vec<f64> = (0..n).map(|k| 1.0 / a[(k, k)].sqrt()).collect();
            for r in 0..n {
                for c in 0..n {
                    a[(r, c)] *= scale[r] * scale[c];
                }
            }
            let rhs = DVector::from_iterator(n, (0..n).map(|k| eps * st.grad[k] * scale[k]));
            let y = match a.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match a.lu().solve(&rhs) {
                    Some(y) => y,
                    None => break,
                },
            };
            let dir: Vec<f64> = (0..n).map(|k| y[k] * scale[k]).collect();
            let slope: f64 = dir.iter().zip(&st.grad).map(|(d, gr)| d * gr).sum();
            let d0 = self.dual(f, g, eps);
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha > 1e-12 {
                let nf: Vec<f64> = (0..self.nr).map(|i| f[i] + alpha * dir[i]).collect();
                let ng: Vec<f64> = (0..self.nc).map(|j| g[j] + alpha * dir[self.nr + j]).collect();
                let d1 = self.dual(&nf, &ng, eps);
                if d1 >= d0 + 1e-4 * alpha * slope {
                    accepted = Some((nf, ng));
                    break;
                }
                if d1 >= d0 - 1e-13 * d0.abs() {
                    // rounding-level change in the objective: judge by the gradient
                    let s1 = self.state(&nf, &ng, eps);
                    if s1.residual < st.residual {
                        accepted = Some((nf, ng));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            steps += 1;
            match accepted {
                Some((nf, ng)) => {
                    f.copy_from_slice(&nf);
                    g.copy_from_slice(&ng);
                    st = self.state(f, g, eps);
                    if st.residual < 0.5 * best {
                        best = st.residual;
                        stalled = 0;
                    } else if alpha == 1.0 {
                        stalled += 1;
                    }
                }
                None => break,
            }
        }
        steps
    }

    // plan entries reduced → full problem indices
    fn expand(&self, p: &LetProblem, plan: &[f64]) -> Vec<Vec<f64>> {
        let mut full = vec![vec![0.0; p.mu1.len()]; p.mu0.len()];
        for (ri, &i) in self.rows.iter().enumerate() {
            for (cj, &j) in self.cols.iter().enumerate() {
                full[i][j] = plan[ri * self.nc + cj];
            }
        }
        full
    }

    /// Solves the unregularized optimality system on a spanning forest of
    /// the pairs with dual gap at most `theta`.
    fn snap(&self, f: &[f64], g: &[f64], eps: f64, theta: f64) -> Option<Vec<f64>> {
        let (nr, nc) = (self.nr, self.nc);
        let n = nr + nc;
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..nr {
            for j in 0..nc {
                let c = self.c(i, j);
                if c.is_finite() && c - f[i] - g[j] <= theta {
                    let logh = self.la[i] + self.lb[j] + (f[i] + g[j] - c) / eps;
                    edges.push((logh, i, j));
                }
            }
        }
        edges.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        // Kruskal on nodes 0..nr (rows) and nr..n (cols)
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
        for &(_, i, j) in &edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, nr + j));
            if ri != rj {
                parent[ri] = rj;
                adj[i].push((nr + j, i, j));
                adj[nr + j].push((i, i, j));
            }
        }
        if adj.iter().any(|a| a.is_empty()) {
            return None;
        }
        // potentials p = log σ along the forest, one free shift per tree
        let mut pot = vec![f64::NAN; n];
        let mut plan = vec![0.0; nr * nc];
        let mut seen = vec![false; n];
        let mass = self.a.iter().sum::<f64>() + self.b.iter().sum::<f64>();
        for root in 0..n {
            if seen[root] {
                continue;
            }
            let mut order = vec![root];
            let mut up: Vec<Option<(usize, usize, usize)>> = vec![None; n];
            seen[root] = true;
            pot[root] = 0.0;
            let mut k = 0;
            while k < order.len() {
                let v = order[k];
                k += 1;
                for &(w, i, j) in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        pot[w] = -self.c(i, j) - pot[v];
                        up[w] = Some((v, i, j));
                        order.push(w);
                    }
                }
            }
            let weight = |v: usize| if v < nr { self.a[v] } else { self.b[v - nr] };
            let (mut ra, mut cb) = (0.0, 0.0);
            let top = order.iter().map(|&v| pot[v].abs()).fold(0.0, f64::max);
            for &v in &order {
                if v < nr {
                    ra += weight(v) * (pot[v] - top).exp();
                } else {
                    cb += weight(v) * (pot[v] - top).exp();
                }
            }
            let shift = 0.5 * (cb.ln() - ra.ln());
            for &v in &order {
                pot[v] += if v < nr { shift } else { -shift };
            }
            let mut demand: Vec<f64> = order.iter().map(|&v| weight(v) * pot[v].exp()).collect();
            let pos: std::collections::HashMap<usize, usize> =
                order.iter().enumerate().map(|(k, &v)| (v, k)).collect();
            for k in (1..order.len()).rev() {
                let v = order[k];
                let (u, i, j) = up[v].expect("non-root node has a parent");
                let h = demand[k];
                if h < -1e-13 * mass {
                    return None;
                }
                let h = h.max(0.0);
                plan[i * nc + j] = h;
                demand[pos[&u]] -= h;
            }
            if demand[0].abs() > 1e-11 * mass.max(1.0) {
                return None;
            }
        }
        // dual feasibility on every finite pair
        for i in 0..nr {
            for j in 0..nc {
                let c = self.c(i, j);
                if c.is_finite() && pot[i] + pot[nr + j] + c < -1e-11 {
                    return None;
                }
            }
        }
        Some(plan)
    }
}

/// Solves LET with default options and accuracy `tol`.
pub fn solve_let(p: &LetProblem, tol: f64) -> Result<LetSolution> {
    solve_let_with(p, &SolverOptions::with_tol(tol))
}

pub fn solve_let_with(p: &LetProblem, opts: &SolverOptions) -> Result<LetSolution> {
    if !(opts.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let core = Core::new(p);
    let mass = p.mu0.mass() + p.mu1.mass();
    let mut diag = Diagnostics {
        levels: Vec::new(),
        final_eps: 0.0,
        iterations: 0,
        raw_value: 0.0,
        extrapolated_value: 0.0,
        exact: false,
    };
    let finish = |plan: Vec<Vec<f64>>, value: f64, diag: Diagnostics| -> LetSolution {
        let sol = LetSolution {
            problem: p.clone(),
            sigma0: Vec::new(),
            sigma1: Vec::new(),
            plan,
            value,
            diagnostics: diag,
        };
        let eta0 = sol.eta0();
        let eta1 = sol.eta1();
        LetSolution {
            sigma0: eta0.iter().zip(&p.mu0.weights).map(|(e, w)| e / w).collect(),
            sigma1: eta1.iter().zip(&p.mu1.weights).map(|(e, w)| e / w).collect(),
            ..sol
        }
    };
    if core.nr == 0 {
        diag.exact = true;
        diag.raw_value = mass;
        diag.extrapolated_value = mass;
        let plan = vec![vec![0.0; p.mu1.len()]; p.mu0.len()];
        return Ok(finish(plan, mass, diag));
    }
    let mut f = vec![0.0; core.nr];
    let mut g = vec![0.0; core.nc];
    let mut eps = opts.eps_start;
    let eps_min = opts.tol.min(opts.eps_start);
    let gtol = 1e-14 * mass.max(1.0);
    let mut last_plan: Vec<f64>;
    loop {
        let mut sweeps = 0;
        while sweeps < opts.max_sweeps {
            core.sweep(&mut f, &mut g, eps);
            sweeps += 1;
            if core.state(&f, &g, eps).residual <= 1e-3 * mass {
                break;
            }
        }
        let steps = core.newton(&mut f, &mut g, eps, opts.max_newton, gtol);
        diag.iterations += sweeps + steps;
        let st = core.state(&f, &g, eps);
        let value = let_functional(p, &core.expand(p, &st.plan));
        diag.levels.push(LevelLog {
            eps,
            sweeps,
            newton_steps: steps,
            residual: st.residual,
            value,
        });
        diag.final_eps = eps;
        last_plan = st.plan;
        if opts.snap {
            let snapped = [4.0, 16.0, 64.0]
                .iter()
                .find_map(|&m| core.snap(&f, &g, eps, m * eps));
            if let Some(plan) = snapped {
                let full = core.expand(p, &plan);
                let value = let_functional(p, &full);
                diag.exact = true;
                diag.raw_value = value;
                diag.extrapolated_value = value;
                return Ok(finish(full, value, diag));
            }
        }
        if eps <= eps_min * (1.0 + 1e-12) {
            break;
        }
        eps = (eps / opts.eps_factor).max(eps_min);
    }
    let n = diag.levels.len();
    let raw = diag.levels[n - 1].value;
    diag.raw_value = raw;
    diag.extrapolated_value = if n >= 2 {
        let (e1, v1) = (diag.levels[n - 2].eps, diag.levels[n - 2].value);
        let (e2, v2) = (diag.levels[n - 1].eps, raw);
        let q = e1 / e2;
        (q * v2 - v1) / (q - 1.0)
    } else {
        raw
    };
    let residual = diag.levels[n - 1].residual;
    if !(residual <= 1e-6 * mass.max(1.0)) {
        return Err(Error::NonConvergence(format!(
            "marginal residual {residual:.3e} at eps = {:.1e}",
            diag.final_eps
        )));
    }
    Ok(finish(core.expand(p, &last_plan), raw, diag))
}

/// Worst residual per optimality condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// Largest `σ` on atoms that are out of transport range (must be exactly 0).
    pub unmatched_sigma: f64,
    /// Largest `cos²(δd) − σ0 σ1` over all pairs.
    pub feasibility: f64,
    /// Largest `|σ0 σ1 − cos²(δd)|` on the support of the plan.
    pub complementarity: f64,
    /// `|value − (μ0(X) + μ1(X) − 2 H(X × X))|`.
    pub value_identity: f64,
    pub passed: bool,
}

pub fn verify_optimality(sol: &LetSolution, tol: f64) -> OptimalityReport {
    let p = &sol.problem;
    let rc = reduced_couple(p);
    let mut unmatched: f64 = 0.0;
    for (i, &keep) in rc.primed0.iter().enumerate() {
        if !keep {
            unmatched = unmatched.max(sol.sigma0[i]);
        }
    }
    for (j, &keep) in rc.primed1.iter().enumerate() {
        if !keep {
            unmatched = unmatched.max(sol.sigma1[j]);
        }
    }
    let support_floor = 1e-10 * (p.mu0.mass() + p.mu1.mass()).max(1e-300);
    let mut feas = f64::NEG_INFINITY;
    let mut comp: f64 = 0.0;
    for i in 0..p.mu0.len() {
        for j in 0..p.mu1.len() {
            let c2 = cos2_cut(p.delta, p.distance(i, j));
            let prod = sol.sigma0[i] * sol.sigma1[j];
            feas = feas.max(c2 - prod);
            if sol.plan[i][j] > support_floor {
                comp = comp.max((prod - c2).abs());
            }
        }
    }
    if feas == f64::NEG_INFINITY {
        feas = 0.0;
    }
    let identity = (sol.value - (p.mu0.mass() + p.mu1.mass() - 2.0 * sol.transported())).abs();
    OptimalityReport {
        passed: unmatched == 0.0 && feas <= tol && comp <= tol,
        unmatched_sigma: unmatched,
        feasibility: feas,
        complementarity: comp,
        value_identity: identity,
    }
}

/// Split of each measure into the part within transport range of the other
/// (primed) and the rest (double-primed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedCouple {
    pub mu0_prime: DiscreteMeasure,
    pub mu0_rest: DiscreteMeasure,
    pub mu1_prime: DiscreteMeasure,
    pub mu1_rest: DiscreteMeasure,
    /// Per-atom membership in the primed parts.
    pub primed0: Vec<bool>,
    pub primed1: Vec<bool>,
}

pub fn reduced_couple(p: &LetProblem) -> ReducedCouple {
    let near = |x: usize, other: &DiscreteMeasure| {
        other
            .support
            .iter()
            .any(|&y| p.delta * p.space.d(x, y) < FRAC_PI_2)
    };
    let primed0: Vec<bool> = p.mu0.support.iter().map(|&x| near(x, &p.mu1)).collect();
    let primed1: Vec<bool> = p.mu1.support.iter().map(|&x| near(x, &p.mu0)).collect();
    let not = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<_>>();
    ReducedCouple {
        mu0_prime: p.mu0.restrict(&primed0),
        mu0_rest: p.mu0.restrict(&not(&primed0)),
        mu1_prime: p.mu1.restrict(&primed1),
        mu1_rest: p.mu1.restrict(&not(&primed1)),
        primed0,
        primed1,
    }
}

/// Transported mass against its bounds; slacks are `bound − mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMassReport {
    pub total: f64,
    pub total_bound: f64,
    pub total_slack: f64,
    pub subset: f64,
    pub subset_bound: f64,
    pub subset_slack: f64,
}

/// Checks `H(X×X) ≤ √(μ0'(X) μ1'(X))` and
/// `H(A×X) ≤ √(μ0'(A) μ1'(A_b))` with `b = π/(2δ)`, where `A` is a set of
/// atom indices of `μ0` and `A_b` its closed `b`-enlargement.
pub fn plan_mass_bounds(sol: &LetSolution, subset: &[usize]) -> Result<PlanMassReport> {
    let p = &sol.problem;
    if let Some(&k) = subset.iter().find(|&&k| k >= p.mu0.len()) {
        return Err(Error::UnknownPoint {
            index: k,
            len: p.mu0.len(),
        });
    }
    let rc = reduced_couple(p);
    let total = sol.transported();
    let total_bound = (rc.mu0_prime.mass() * rc.mu1_prime.mass()).sqrt();
    let eta0 = sol.eta0();
    let sub: f64 = subset.iter().map(|&k| eta0[k]).sum();
    let mu0a: f64 = subset
        .iter()
        .filter(|&&k| rc.primed0[k])
        .map(|&k| p.mu0.weights[k])
        .sum();
    let reach = FRAC_PI_2 / p.delta;
    let mu1ab: f64 = (0..p.mu1.len())
        .filter(|&j| rc.primed1[j] && subset.iter().any(|&k| p.distance(k, j) <= reach))
        .map(|j| p.mu1.weights[j])
        .sum();
    let subset_bound = (mu0a * mu1ab).sqrt();
    Ok(PlanMassReport {
        total,
        total_bound,
        total_slack: total_bound - total,
        subset: sub,
        subset_bound,
        subset_slack: subset_bound - sub,
    })
}
