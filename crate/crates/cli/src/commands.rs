//! The `hk`, `shk` and `geodesic` commands.

use std::fs;

use anyhow::{bail, Context};
use hkcone::hk_space::{geodesic_from_solution, shk_from_hk2};
use hkcone::let_solver::{solve_let, Diagnostics, LetProblem, LetSolution, ProblemFile};
use serde::Serialize;

use crate::{Format, Header, Outcome, RunConfig};

pub fn load_problem(cfg: &RunConfig) -> anyhow::Result<LetProblem> {
    let path = cfg.input.as_ref().context("--input is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut file: ProblemFile =
        serde_json::from_str(&text).with_context(|| format!("{} is not a problem file", path.display()))?;
    if let Some(d) = cfg.delta {
        file.delta = d;
    }
    LetProblem::from_file(&file).with_context(|| format!("invalid problem in {}", path.display()))
}

fn is_probability(p: &LetProblem) -> bool {
    (p.mu0.mass() - 1.0).abs() <= 1e-10 && (p.mu1.mass() - 1.0).abs() <= 1e-10
}

#[derive(Serialize)]
struct SolutionReport<'a> {
    header: Header,
    delta: f64,
    hk: f64,
    shk: Option<f64>,
    value: f64,
    transported: f64,
    #[serde(rename = "H")]
    plan: &'a [Vec<f64>],
    sigma0: &'a [f64],
    sigma1: &'a [f64],
    diagnostics: &'a Diagnostics,
}

fn require_json(cfg: &RunConfig, what: &str) -> anyhow::Result<()> {
    if cfg.format == Some(Format::Csv) {
        bail!("{what} output is JSON only");
    }
    Ok(())
}

pub fn hk(cfg: &RunConfig, spherical: bool) -> anyhow::Result<Outcome> {
    let command = if spherical { "shk" } else { "hk" };
    require_json(cfg, command)?;
    let p = load_problem(cfg)?;
    let probabilities = is_probability(&p);
    if spherical && !probabilities {
        bail!(
            "shk needs probability measures; masses are {} and {}",
            p.mu0.mass(),
            p.mu1.mass()
        );
    }
    let sol: LetSolution = solve_let(&p, cfg.tol)?;
    let report = SolutionReport {
        header: cfg.header(command),
        delta: p.delta,
        hk: sol.value.max(0.0).sqrt(),
        shk: probabilities.then(|| shk_from_hk2(sol.value)),
        value: sol.value,
        transported: sol.transported(),
        plan: &sol.plan,
        sigma0: &sol.sigma0,
        sigma1: &sol.sigma1,
        diagnostics: &sol.diagnostics,
    };
    cfg.emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct MassSample {
    t: f64,
    mass: f64,
    law: f64,
}

#[derive(Serialize)]
struct Atom {
    atom: usize,
    x: Vec<f64>,
    mass: f64,
}

#[derive(Serialize)]
struct Frame {
    t: f64,
    atoms: Vec<Atom>,
}

#[derive(Serialize)]
struct GeodesicReport {
    header: Header,
    delta: f64,
    hk2: f64,
    mass_law_residual: f64,
    masses: Vec<MassSample>,
    frames: Vec<Frame>,
}

pub fn geodesic(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p = load_problem(cfg)?;
    let sol = solve_let(&p, cfg.tol)?;
    let g = geodesic_from_solution(&sol, cfg.grid)?;
    let residual = g.mass_law_residual();
    // Rays first, then created or annihilated atoms, so indices are stable in t.
    let frames: Vec<Frame> = g
        .times()
        .into_iter()
        .map(|t| {
            let atoms: Vec<Atom> = g
                .rays
                .iter()
                .map(|r| {
                    let z = r.cone.at(t);
                    (z.x, r.mass_at(t))
                })
                .chain(g.unmatched.iter().map(|u| (g.space.points()[u.point].clone(), u.mass_at(t))))
                .enumerate()
                .map(|(atom, (x, mass))| Atom { atom, x, mass })
                .collect();
            Frame { t, atoms }
        })
        .collect();
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let report = GeodesicReport {
                header: cfg.header("geodesic"),
                delta: p.delta,
                hk2: g.hk2,
                mass_law_residual: residual,
                masses: g
                    .times()
                    .into_iter()
                    .map(|t| MassSample {
                        t,
                        mass: g.mass(t),
                        law: g.mass_law(t),
                    })
                    .collect(),
                frames,
            };
            cfg.emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Format::Csv => cfg.emit(&geodesic_csv(cfg, p.delta, g.hk2, residual, &frames)?)?,
    }
    Ok(Outcome::Pass)
}

fn geodesic_csv(cfg: &RunConfig, delta: f64, hk2: f64, residual: f64, frames: &[Frame]) -> anyhow::Result<String> {
    let h = cfg.header("geodesic");
    let mut text = format!(
        "# tool={} version={} command={} seed={} tol={:?} grid={} delta={:?}\n# hk2={:?} mass_law_residual={:?}\n",
        h.tool, h.version, h.command, h.seed, h.tol, h.grid, delta, hk2, residual
    );
    let dim = frames
        .iter()
        .flat_map(|f| f.atoms.iter().map(|a| a.x.len()))
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["t".to_string(), "atom".to_string()];
    head.extend((0..dim).map(|k| format!("x{k}")));
    head.push("mass".into());
    w.write_record(&head)?;
    for f in frames {
        for a in &f.atoms {
            let mut row = vec![f.t.to_string(), a.atom.to_string()];
            row.extend(a.x.iter().map(f64::to_string));
            row.extend((a.x.len()..dim).map(|_| String::new()));
            row.push(a.mass.to_string());
            w.write_record(&row)?;
        }
    }
    text.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(text)
}
