//! Seeded property suites behind `hkcone check`.

use std::f64::consts::PI;
use std::fs;
use std::sync::Arc;

use anyhow::{bail, Context};
use hkcone::angles::{kappa_independence_gap, mlac_check, Schedule};
use hkcone::cone_geometry::{lift_geodesic, ConeMetric, ConePoint, Cutoff};
use hkcone::fixtures::{self, rng};
use hkcone::hk_space::{cone_structure_residual, scaling_residual, shk_from_hk2, SHK_DIAMETER};
use hkcone::let_solver::{
    plan_mass_bounds, reduced_couple, solve_let, verify_optimality, DiscreteMeasure, LetProblem, ProblemFile,
};
use hkcone::measure_sets::{
    class_membership, density_bounds_check, doubling_constants, geodesic_containment_check,
    hk_semiconcavity_estimate, ratio_scales, MeasureClass,
};
use hkcone::metric_base::{Model, MetricSpace, SpaceDescriptor};
use hkcone::semiconcavity::{cone_transfer_a, estimate_k, sine_interpolation_margin, Variant};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::load_problem;
use crate::{Format, Header, Outcome, RunConfig, Suite};

/// Worst observed value of one property against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub instances: usize,
    pub worst: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub bound: f64,
    pub passed: bool,
}

struct Tally {
    check: Check,
    upper: bool,
}

impl Tally {
    fn at_most(name: &str, bound: f64) -> Self {
        Self::new(name, bound, true)
    }

    fn at_least(name: &str, bound: f64) -> Self {
        Self::new(name, bound, false)
    }

    fn new(name: &str, bound: f64, upper: bool) -> Self {
        Tally {
            check: Check {
                name: name.to_string(),
                instances: 0,
                worst: if upper { f64::NEG_INFINITY } else { f64::INFINITY },
                relation: if upper { "<=" } else { ">=" },
                bound,
                passed: true,
            },
            upper,
        }
    }

    fn record(&mut self, v: f64) {
        let c = &mut self.check;
        c.instances += 1;
        if v.is_nan() {
            c.worst = f64::NAN;
            c.passed = false;
            return;
        }
        if !c.worst.is_nan() {
            c.worst = if self.upper { c.worst.max(v) } else { c.worst.min(v) };
        }
        let ok = if self.upper { v <= c.bound } else { v >= c.bound };
        c.passed &= ok;
    }

    fn finish(self) -> Check {
        self.check
    }
}

#[derive(Serialize)]
struct SuiteReport {
    header: Header,
    suite: Suite,
    passed: bool,
    checks: Vec<Check>,
}

pub fn run(cfg: &RunConfig, suite: Suite) -> anyhow::Result<Outcome> {
    if cfg.format == Some(Format::Csv) {
        bail!("check reports are JSON only");
    }
    let mut r = rng(cfg.seed);
    let checks = match suite {
        Suite::Scaling => scaling(cfg, &mut r)?,
        Suite::Metric => metric(cfg, &mut r)?,
        Suite::Optimality => optimality(cfg, &mut r)?,
        Suite::Lac => generated_only(cfg, "lac").and_then(|_| lac(&mut r))?,
        Suite::Semiconcavity => generated_only(cfg, "semiconcavity").and_then(|_| semiconcavity(cfg, &mut r))?,
        Suite::Doubling => generated_only(cfg, "doubling").and_then(|_| doubling(cfg, &mut r))?,
    };
    let passed = checks.iter().all(|c| c.passed);
    let report = SuiteReport {
        header: cfg.header(&format!("check {}", suite_name(suite))),
        suite,
        passed,
        checks,
    };
    cfg.emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(if passed { Outcome::Pass } else { Outcome::PropertyFailure })
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::Scaling => "scaling",
        Suite::Metric => "metric",
        Suite::Optimality => "optimality",
        Suite::Lac => "lac",
        Suite::Semiconcavity => "semiconcavity",
        Suite::Doubling => "doubling",
    }
}

fn generated_only(cfg: &RunConfig, name: &str) -> anyhow::Result<()> {
    if cfg.input.is_some() {
        bail!("the {name} suite generates its own fixtures and takes no --input");
    }
    Ok(())
}

fn instance(cfg: &RunConfig, fixed: &Option<LetProblem>, r: &mut ChaCha8Rng, delta: f64) -> anyhow::Result<LetProblem> {
    if let Some(p) = fixed {
        return Ok(p.clone());
    }
    let (k0, k1) = (r.gen_range(1..=5), r.gen_range(1..=5));
    Ok(fixtures::random_problem(r, 12, k0, k1, cfg.delta.unwrap_or(delta))?)
}

fn fixed_problem(cfg: &RunConfig) -> anyhow::Result<Option<LetProblem>> {
    cfg.input.as_ref().map(|_| load_problem(cfg)).transpose()
}

fn scaling(cfg: &RunConfig, r: &mut ChaCha8Rng) -> anyhow::Result<Vec<Check>> {
    let fixed = fixed_problem(cfg)?;
    let mut scal = Tally::at_most("scaling_residual", 1e-4);
    let mut cone = Tally::at_most("cone_structure_residual", 1e-4);
    for _ in 0..20 {
        let p = instance(cfg, &fixed, r, 1.0)?;
        let (r0, r1) = (r.gen_range(0.1..=10.0), r.gen_range(0.1..=10.0));
        scal.record(scaling_residual(&p, r0, r1, cfg.tol)?.residual.abs());
        let q = LetProblem::new(p.space.clone(), p.mu0.normalized()?, p.mu1.normalized()?, p.delta)?;
        cone.record(cone_structure_residual(&q, r0, r1, cfg.tol)?.abs());
    }
    Ok(vec![scal.finish(), cone.finish()])
}

fn load_space(cfg: &RunConfig) -> anyhow::Result<MetricSpace> {
    let path = cfg.input.as_ref().context("--input is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    if let Ok(file) = serde_json::from_str::<ProblemFile>(&text) {
        return Ok(MetricSpace::from_descriptor(&file.space)?);
    }
    let desc: SpaceDescriptor = serde_json::from_str(&text)
        .with_context(|| format!("{} is neither a problem nor a space file", path.display()))?;
    MetricSpace::from_descriptor(&desc).with_context(|| format!("invalid space in {}", path.display()))
}

fn metric(cfg: &RunConfig, r: &mut ChaCha8Rng) -> anyhow::Result<Vec<Check>> {
    let space = match cfg.input {
        Some(_) => load_space(cfg)?,
        None => fixtures::euclidean_cloud(r, 10, 2, 1.0)?,
    };
    let space = Arc::new(space);
    let delta = cfg.delta.unwrap_or(1.0);
    let n = space.len();
    let mut base = Tally::at_most("base_triangle_violation", 1e-9 * space.diameter().max(1.0));
    base.record(space.triangle_violation().0);
    let mut hk_tri = Tally::at_least("hk_triangle_slack", -1e-5);
    let mut shk_tri = Tally::at_least("shk_triangle_slack", -1e-5);
    let mut diam = Tally::at_most("shk_value", SHK_DIAMETER + 1e-8);
    let mut sym = Tally::at_most("hk_symmetry_gap", 1e-8);
    let value = |a: &DiscreteMeasure, b: &DiscreteMeasure| -> anyhow::Result<f64> {
        let p = LetProblem::new(space.clone(), a.clone(), b.clone(), delta)?;
        Ok(solve_let(&p, cfg.tol)?.value.max(0.0))
    };
    for _ in 0..20 {
        let ms: Vec<DiscreteMeasure> = (0..3)
            .map(|_| {
                let k = r.gen_range(1..=n.min(5));
                fixtures::random_measure(r, n, k, 0.1, 1.0)
            })
            .collect();
        let ps: Vec<DiscreteMeasure> = ms.iter().map(|m| m.normalized()).collect::<Result<_, _>>()?;
        for (family, tally) in [(&ms, &mut hk_tri), (&ps, &mut shk_tri)] {
            let spherical = std::ptr::eq(family, &ps);
            let mut d = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let v = value(&family[i], &family[j])?;
                    d[i][j] = if spherical { shk_from_hk2(v) } else { v.sqrt() };
                    d[j][i] = d[i][j];
                    if spherical {
                        diam.record(d[i][j]);
                    }
                }
            }
            for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                tally.record(d[i][k] + d[k][j] - d[i][j]);
            }
        }
        let ab = value(&ms[0], &ms[1])?;
        let ba = value(&ms[1], &ms[0])?;
        sym.record((ab - ba).abs());
    }
    Ok(vec![base.finish(), hk_tri.finish(), shk_tri.finish(), diam.finish(), sym.finish()])
}

fn optimality(cfg: &RunConfig, r: &mut ChaCha8Rng) -> anyhow::Result<Vec<Check>> {
    let fixed = fixed_problem(cfg)?;
    let mut feas = Tally::at_most("feasibility", 1e-4);
    let mut comp = Tally::at_most("complementarity", 1e-4);
    let mut unmatched = Tally::at_most("unmatched_sigma", 0.0);
    let mut identity = Tally::at_most("value_identity", 1e-5);
    let mut total = Tally::at_least("total_mass_slack", -1e-8);
    let mut subset = Tally::at_least("subset_mass_slack", -1e-8);
    for _ in 0..20 {
        let delta = r.gen_range(0.5..4.0);
        let p = instance(cfg, &fixed, r, delta)?;
        let sol = solve_let(&p, cfg.tol)?;
        let rep = verify_optimality(&sol, 1e-4);
        feas.record(rep.feasibility);
        comp.record(rep.complementarity);
        identity.record(rep.value_identity);
        let rc = reduced_couple(&p);
        for (sigma, primed) in [(&sol.sigma0, &rc.primed0), (&sol.sigma1, &rc.primed1)] {
            for (s, keep) in sigma.iter().zip(primed) {
                if !keep {
                    unmatched.record(*s);
                }
            }
        }
        let a: Vec<usize> = (0..p.mu0.len()).filter(|_| r.gen_bool(0.5)).collect();
        let m = plan_mass_bounds(&sol, &a)?;
        total.record(m.total_slack);
        subset.record(m.subset_slack);
    }
    Ok(vec![
        feas.finish(),
        comp.finish(),
        unmatched.finish(),
        identity.finish(),
        total.finish(),
        subset.finish(),
    ])
}

fn unit(a: f64) -> Vec<f64> {
    vec![a.cos(), a.sin()]
}

fn lac(r: &mut ChaCha8Rng) -> anyhow::Result<Vec<Check>> {
    let plane = Model::Euclidean;
    let origin = vec![0.0, 0.0];
    let schedule = Schedule::default();
    let mut boundary = Tally::at_most("three_ray_angle_sum_gap", 1e-6);
    let mut verdict = Tally::at_least("mlac_satisfied", 1.0);
    let mut gap = Tally::at_most("kappa_gap", 1e-4);

    let rays: Vec<_> = (0..3)
        .map(|k| plane.geodesic(&origin, &unit(2.0 * PI * k as f64 / 3.0)))
        .collect::<Result<_, _>>()?;
    let rep = mlac_check(&plane, &rays, schedule, 1e-6)?;
    boundary.record((rep.angle_sum.unwrap_or(f64::NAN) - 2.0 * PI).abs());
    verdict.record(if rep.satisfied { 1.0 } else { 0.0 });

    let sphere = Model::Sphere;
    let pole = vec![0.0, 0.0, 1.0];
    let pairs = [(1e-3, 1e-3)];
    for _ in 0..5 {
        let m = r.gen_range(3..=5);
        let rays: Vec<_> = (0..m)
            .map(|_| plane.geodesic(&origin, &unit(r.gen_range(0.0..2.0 * PI))))
            .collect::<Result<_, _>>()?;
        verdict.record(if mlac_check(&plane, &rays, schedule, 1e-6)?.satisfied { 1.0 } else { 0.0 });
        gap.record(kappa_independence_gap(&plane, &rays[0], &rays[1], 1.0, &pairs)?.max_gap);

        let ends: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                let a = r.gen_range(0.0..2.0 * PI);
                let h: f64 = r.gen_range(0.2..1.0);
                vec![h.sin() * a.cos(), h.sin() * a.sin(), h.cos()]
            })
            .collect();
        let g1 = sphere.geodesic(&pole, &ends[0])?;
        let g2 = sphere.geodesic(&pole, &ends[1])?;
        gap.record(kappa_independence_gap(&sphere, &g1, &g2, 1.0, &pairs)?.max_gap);
    }
    Ok(vec![boundary.finish(), verdict.finish(), gap.finish()])
}

fn cap(r: &mut ChaCha8Rng, radius: f64) -> Vec<f64> {
    fixtures::cap_point(r, radius).to_vec()
}

fn semiconcavity(cfg: &RunConfig, r: &mut ChaCha8Rng) -> anyhow::Result<Vec<Check>> {
    let mut sine = Tally::at_least("sine_interpolation_margin", -1e-12);
    for i in 0..100 {
        for j in 0..100 {
            sine.record(sine_interpolation_margin(i as f64 / 99.0, PI * j as f64 / 99.0));
        }
    }
    let grid = cfg.grid;
    let plane = Model::Euclidean;
    let mut flat = Tally::at_most("euclidean_f2_excess", 1e-9);
    for _ in 0..10 {
        let mut pt = || vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let (x0, x1, x2) = (pt(), pt(), pt());
        let g = plane.geodesic(&x0, &x1)?;
        flat.record(estimate_k(&plane, &g, &x2, Variant::F2, grid)?.excess());
    }
    let sphere = Model::Sphere;
    let cone = ConeMetric::new(sphere, Cutoff::Pi);
    let mut transfer = Tally::at_least("cone_transfer_margin", 0.0);
    for _ in 0..10 {
        let radius = r.gen_range(0.2..0.6);
        let (x0, x1, x2) = (cap(r, radius), cap(r, radius), cap(r, radius));
        let (r0, r1, r2) = (r.gen_range(0.5..2.0), r.gen_range(0.5..2.0), r.gen_range(0.5..2.0));
        let base = sphere.geodesic(&x0, &x1)?;
        let k_base = estimate_k(&sphere, &base, &x2, Variant::F1, grid)?.k;
        let lifted = lift_geodesic(base, r0, r1)?;
        let k_cone = estimate_k(&cone, &lifted, &ConePoint::new(x2, r2)?, Variant::F2, grid)?.k;
        transfer.record(cone_transfer_a(k_base, r0, r1, r2, radius)? - k_cone);
    }
    let space = Arc::new(fixtures::square_grid(4, 1.0)?);
    let reference = fixtures::uniform(space.len(), 1.0 / space.len() as f64);
    let mut measures = (0..3).map(|_| fixtures::perturbed(r, &reference, 0.6, 1.8));
    let (mu0, mu1, mu2) = (measures.next().unwrap(), measures.next().unwrap(), measures.next().unwrap());
    let p = LetProblem::new(space, mu0, mu1, cfg.delta.unwrap_or(2.0))?;
    let mut finite = Tally::at_most("hk_measure_constant", f64::MAX);
    finite.record(hk_semiconcavity_estimate(&p, &mu2, &reference, 0.5, cfg.tol, grid.min(17))?.k);
    Ok(vec![sine.finish(), flat.finish(), transfer.finish(), finite.finish()])
}

fn doubling(cfg: &RunConfig, r: &mut ChaCha8Rng) -> anyhow::Result<Vec<Check>> {
    let space = Arc::new(fixtures::square_grid(6, 1.0)?);
    let reference = fixtures::uniform(space.len(), 1.0 / space.len() as f64);
    let density = 0.5;
    let h = 0.2;
    let rep = doubling_constants(&space, &reference, &ratio_scales(h, 2.0, space.diameter()))?;
    let mut constant = Tally::at_most("reference_doubling_constant", f64::MAX);
    constant.record(rep.max_measure());
    let mut lo = Tally::at_least("ball_ratio_min", density);
    let mut hi = Tally::at_most("ball_ratio_max", 1.0 / density);
    let mut sigma_lo = Tally::at_least("sigma_over_c_min", 1.0);
    let mut sigma_hi = Tally::at_most("sigma_over_c_max", 1.0);
    let mut contained = Tally::at_least("geodesic_containment", 1.0);
    let deltas: Vec<f64> = match cfg.delta {
        Some(d) => vec![d],
        None => vec![1.0, 2.0, 4.0],
    };
    for delta in deltas {
        let mu0 = fixtures::perturbed(r, &reference, 0.6, 1.8);
        let mu1 = fixtures::perturbed(r, &reference, 0.6, 1.8);
        for mu in [&mu0, &mu1] {
            let bounded = class_membership(&space, mu, &reference, MeasureClass::Bounded { delta: density })?;
            if !bounded.member {
                bail!("generated measure left the density class");
            }
            let ball = class_membership(&space, mu, &reference, MeasureClass::Ball { d1: h, d2: density })?;
            lo.record(ball.min_ratio);
            hi.record(ball.max_ratio);
        }
        let p = LetProblem::new(space.clone(), mu0, mu1, delta)?;
        let sol = solve_let(&p, cfg.tol)?;
        let d1 = PI / (4.0 * delta);
        let b = density_bounds_check(&sol, &reference, d1, density)?;
        sigma_lo.record(b.sigma_min / b.c_min);
        sigma_hi.record(b.sigma_max / b.c_max);
        let c = geodesic_containment_check(&sol, &reference, density, cfg.grid)?;
        contained.record(if c.passed { 1.0 } else { 0.0 });
    }
    Ok(vec![
        constant.finish(),
        lo.finish(),
        hi.finish(),
        sigma_lo.finish(),
        sigma_hi.finish(),
        contained.finish(),
    ])
}
