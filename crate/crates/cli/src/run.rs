//! Subcommand drivers. Each returns the artifacts it produced; nothing is
//! written to disk here.

use anyhow::{anyhow, Context, Result};
use descent_lab::equilibrium::InitialGuess;
use descent_lab::saddle::{airy_deformed_with, trace_steepest_path, PolynomialPhase};
use descent_lab::scurve::caustic_map;
use descent_lab::soliton::evaluate_psi;
use descent_lab::wkb::{rho_with_tol, tau_with_tol, turning_points};
use descent_lab::{
    build_ensemble, maximin_search, solve_equilibrium, BumpProfile, Complex64, Contour,
    DiscreteMeasure, EquilibriumSolution, FieldSpec, Genus,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, Subcommand};
use crate::output::{heatmap, num, Artifacts, Plot};

/// How a run ended. Only sweeps can fail partially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    PartialFailure,
    TotalFailure,
}

pub struct Outcome {
    pub artifacts: Artifacts,
    pub status: Status,
}

pub fn execute(cmd: Subcommand, cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Artifacts::default();
    let status = match cmd {
        Subcommand::Equilibrium => equilibrium(cfg, &mut out)?,
        Subcommand::Maximin => maximin(cfg, &mut out)?,
        Subcommand::Sweep => sweep(cfg, &mut out)?,
        Subcommand::Soliton => soliton(cfg, &mut out)?,
        Subcommand::Wkb => wkb(cfg, &mut out)?,
        Subcommand::Airy => airy(cfg, &mut out)?,
    };
    Ok(Outcome {
        artifacts: out,
        status,
    })
}

fn nls_field(cfg: &RunConfig) -> Result<FieldSpec> {
    Ok(FieldSpec::nls(cfg.field.x, cfg.field.t, cfg.field.a)?)
}

fn genus_label(g: Genus) -> String {
    match g {
        Genus::Empty => "empty".into(),
        Genus::Genus(n) => n.to_string(),
    }
}

#[derive(Serialize)]
struct SolutionReport<'a> {
    energy: f64,
    kkt_on_support: f64,
    kkt_off_support: f64,
    genus: Genus,
    bands: &'a [(usize, usize)],
    iterations: usize,
    total_mass: f64,
    nodes: Vec<[f64; 2]>,
    weights: &'a [f64],
    support_mask: &'a [bool],
}

impl<'a> SolutionReport<'a> {
    fn new(sol: &'a EquilibriumSolution) -> Self {
        Self {
            energy: sol.energy_value,
            kkt_on_support: sol.kkt_on_support,
            kkt_off_support: sol.kkt_off_support,
            genus: sol.genus(),
            bands: &sol.bands,
            iterations: sol.iterations,
            total_mass: sol.measure.total_mass(),
            nodes: sol.measure.nodes.iter().map(|p| [p.re, p.im]).collect(),
            weights: &sol.measure.weights,
            support_mask: &sol.support_mask,
        }
    }
}

fn arc_positions(mu: &DiscreteMeasure) -> Vec<f64> {
    let mut s = 0.0;
    mu.cell_lengths
        .iter()
        .map(|l| {
            let mid = s + 0.5 * l;
            s += l;
            mid
        })
        .collect()
}

fn density_rows(sol: &EquilibriumSolution) -> Vec<Vec<String>> {
    let mu = &sol.measure;
    arc_positions(mu)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let dens = if mu.is_density() {
                mu.density(i)
            } else {
                mu.weights[i]
            };
            vec![
                i.to_string(),
                num(mu.nodes[i].re),
                num(mu.nodes[i].im),
                num(s),
                num(mu.weights[i]),
                num(dens),
                sol.support_mask[i].to_string(),
            ]
        })
        .collect()
}

const DENSITY_HEADER: [&str; 7] = [
    "index",
    "re",
    "im",
    "arc_length",
    "weight",
    "density",
    "supported",
];

fn density_plot(sol: &EquilibriumSolution) -> String {
    let mu = &sol.measure;
    let mut p = Plot::new("equilibrium density", "arc length", "density");
    let pts = arc_positions(mu)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            (
                s,
                if mu.is_density() {
                    mu.density(i)
                } else {
                    mu.weights[i]
                },
            )
        })
        .collect();
    p.line("density", pts);
    p.render()
}

fn contour_plot(contour: &Contour, sol: &EquilibriumSolution, a: f64) -> String {
    let mut p = Plot::new("contour and support", "Re z", "Im z").equal_aspect();
    p.line(
        "contour",
        contour.points().iter().map(|z| (z.re, z.im)).collect(),
    );
    p.line("spike", vec![(0.0, 0.0), (0.0, a)]);
    for (k, &(b0, b1)) in sol.bands.iter().enumerate() {
        let pts = (b0..=b1)
            .map(|i| (sol.measure.nodes[i].re, sol.measure.nodes[i].im))
            .collect();
        p.line(&format!("band {}", k + 1), pts);
    }
    p.render()
}

fn equilibrium(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let field = nls_field(cfg)?;
    let contour = cfg.contour.build(cfg.field.a)?;
    let mut opts = cfg.solver.clone();
    if let InitialGuess::Random(_) = opts.initial {
        opts.initial = InitialGuess::Random(cfg.seed);
    }
    let sol = solve_equilibrium(&contour, &field, &opts).context("equilibrium solve failed")?;
    log::info!(
        "energy {:.10e}, kkt on {:.3e} off {:.3e}, genus {}",
        sol.energy_value,
        sol.kkt_on_support,
        sol.kkt_off_support,
        genus_label(sol.genus())
    );
    out.json("solution.json", &SolutionReport::new(&sol))?;
    out.csv("density.csv", &DENSITY_HEADER, &density_rows(&sol))?;
    out.svg("density.svg", density_plot(&sol));
    Ok(Status::Complete)
}

#[derive(Serialize)]
struct MaximinReport<'a> {
    energy: f64,
    genus: Genus,
    s_residual: f64,
    band_integral_residual: f64,
    band_integrals: descent_lab::scurve::BandIntegrals,
    local_max_certificate: f64,
    stationarity_tol: f64,
    regularity_unproven: bool,
    converged: bool,
    spike_contact: Vec<[f64; 2]>,
    evaluations: usize,
    sweeps: usize,
    contour: Vec<[f64; 2]>,
    solution: SolutionReport<'a>,
}

fn maximin(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let field = nls_field(cfg)?;
    let start = cfg.contour.build(cfg.field.a)?;
    let res = maximin_search(&start, &field, &cfg.search).context("maximin search failed")?;
    log::info!(
        "energy {:.10e}, certificate {:.3e}, s-residual {:.3e}",
        res.energy,
        res.local_max_certificate,
        res.s_residual
    );
    let report = MaximinReport {
        energy: res.energy,
        genus: res.genus(),
        s_residual: res.s_residual,
        band_integral_residual: res.band_integral_residual,
        band_integrals: res.band_integrals,
        local_max_certificate: res.local_max_certificate,
        stationarity_tol: cfg.search.stationarity_tol,
        regularity_unproven: res.regularity_unproven,
        converged: res.converged,
        spike_contact: res.spike_contact.iter().map(|p| [p.re, p.im]).collect(),
        evaluations: res.evaluations,
        sweeps: res.sweeps,
        contour: res.contour.vertices.iter().map(|p| [p.re, p.im]).collect(),
        solution: SolutionReport::new(&res.solution),
    };
    out.json("maximin.json", &report)?;
    out.csv("density.csv", &DENSITY_HEADER, &density_rows(&res.solution))?;
    let rows: Vec<Vec<String>> = res
        .contour
        .vertices
        .iter()
        .enumerate()
        .map(|(k, p)| vec![k.to_string(), num(p.re), num(p.im)])
        .collect();
    out.csv("contour.csv", &["vertex", "re", "im"], &rows)?;
    out.svg(
        "contour.svg",
        contour_plot(&res.contour, &res.solution, cfg.field.a),
    );
    out.svg("density.svg", density_plot(&res.solution));
    Ok(Status::Complete)
}

fn sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let xs = cfg.sweep.x_grid.values();
    let ts = cfg.sweep.t_grid.values();
    let base = FieldSpec::nls(0.0, 0.0, cfg.field.a)?;
    let map = caustic_map(&base, &xs, &ts, &cfg.sweep.options)?;
    let total = xs.len() * ts.len();
    let failed = map.failures();
    let status = match failed {
        0 => Status::Complete,
        f if f == total => Status::TotalFailure,
        _ => Status::PartialFailure,
    };
    if failed > 0 {
        log::warn!("{failed} of {total} sweep cells failed");
    }
    out.json("sweep.json", &map)?;
    let rows: Vec<Vec<String>> = map
        .cells
        .iter()
        .flatten()
        .map(|c| {
            vec![
                num(c.x),
                num(c.t),
                c.genus.map_or(String::new(), genus_label),
                c.energy.map_or(String::new(), num),
                c.converged.to_string(),
                c.spike_contact.to_string(),
                c.regularity_unproven.to_string(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    out.csv(
        "genus.csv",
        &[
            "x",
            "t",
            "genus",
            "energy",
            "converged",
            "spike_contact",
            "regularity_unproven",
            "error",
        ],
        &rows,
    )?;
    let grid: Vec<Vec<Option<usize>>> = map
        .genus_grid()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|g| match g {
                    Some(Genus::Genus(n)) => Some(n),
                    _ => None,
                })
                .collect()
        })
        .collect();
    out.svg(
        "genus.svg",
        heatmap("genus of the maximin support", &xs, &ts, &grid),
    );
    Ok(status)
}

#[derive(Serialize)]
struct SolitonReport {
    n: usize,
    a: f64,
    hbar: f64,
    eigenvalues: Vec<Complex64>,
    norming: Vec<Complex64>,
    points: usize,
    max_condition_log10: f64,
    max_error_bound: f64,
    max_precision_bits: u64,
}

fn soliton(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let p = &cfg.soliton;
    let mut ens = build_ensemble(cfg.field.a, p.n)?;
    if let Some(c) = &p.norming {
        ens = ens.with_norming(c.iter().map(|&[re, im]| Complex64::new(re, im)).collect())?;
    }
    let xs = p.x_grid.values();
    let ts = p.t_grid.values();
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (x, t)))
        .collect();
    let vals = pts
        .par_iter()
        .map(|&(x, t)| evaluate_psi(&ens, x, t).with_context(|| format!("ψ at x = {x}, t = {t}")))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = pts
        .iter()
        .zip(&vals)
        .map(|(&(x, t), v)| {
            vec![
                num(x),
                num(t),
                num(v.psi.re),
                num(v.psi.im),
                num(v.psi.norm()),
            ]
        })
        .collect();
    let report = SolitonReport {
        n: ens.n,
        a: ens.a,
        hbar: ens.hbar,
        eigenvalues: ens.eigenvalues.clone(),
        norming: ens.norming.clone(),
        points: pts.len(),
        max_condition_log10: vals
            .iter()
            .map(|v| v.condition_log10)
            .fold(f64::NEG_INFINITY, f64::max),
        max_error_bound: vals.iter().map(|v| v.error_bound).fold(0.0, f64::max),
        max_precision_bits: vals.iter().map(|v| v.precision_bits).max().unwrap_or(0),
    };
    out.json("soliton.json", &report)?;
    out.csv("psi.csv", &["x", "t", "re_psi", "im_psi", "abs_psi"], &rows)?;
    let mut plot = Plot::new(&format!("|ψ| for N = {}", ens.n), "x", "|ψ|");
    for (k, &t) in ts.iter().enumerate() {
        let line = (0..xs.len())
            .map(|i| (xs[i], vals[k * xs.len() + i].psi.norm()))
            .collect();
        plot.line(&format!("t = {t}"), line);
    }
    out.svg("psi.svg", plot.render());
    Ok(Status::Complete)
}

#[derive(Serialize)]
struct WkbRow {
    z: f64,
    x_minus: f64,
    x_plus: f64,
    tau: f64,
    tau_error: f64,
    rho: f64,
    rho_error: f64,
}

fn wkb(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let u0 = BumpProfile::sech2();
    let tol = cfg.wkb.quad_tol;
    let zs = cfg.wkb.z_grid.values();
    let rows = zs
        .par_iter()
        .map(|&z| -> Result<WkbRow> {
            let (xm, xp) = turning_points(z, &u0)?;
            let t = tau_with_tol(z, &u0, tol)?;
            let r = rho_with_tol(z, &u0, tol)?;
            Ok(WkbRow {
                z,
                x_minus: xm,
                x_plus: xp,
                tau: t.value,
                tau_error: t.error,
                rho: r.value,
                rho_error: r.error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.json("wkb.json", &rows)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.z),
                num(r.x_minus),
                num(r.x_plus),
                num(r.tau),
                num(r.rho),
            ]
        })
        .collect();
    out.csv("wkb.csv", &["z", "x_minus", "x_plus", "tau", "rho"], &table)?;
    let mut plot = Plot::new("WKB phase integrals", "z", "value");
    plot.line("τ", rows.iter().map(|r| (r.z, r.tau)).collect());
    plot.line("ρ", rows.iter().map(|r| (r.z, r.rho)).collect());
    out.svg("wkb.svg", plot.render());
    Ok(Status::Complete)
}

fn airy(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status> {
    let p = &cfg.airy;
    let zs = p.z.values();
    let vals = zs
        .par_iter()
        .map(|&z| airy_deformed_with(z, p.panels, p.nodes).with_context(|| format!("Ai({z})")))
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<Vec<String>> = zs
        .iter()
        .zip(&vals)
        .map(|(&z, &v)| vec![num(z), num(v)])
        .collect();
    out.json(
        "airy.json",
        &zs.iter()
            .zip(&vals)
            .map(|(&z, &ai)| serde_json::json!({"z": z, "ai": ai}))
            .collect::<Vec<_>>(),
    )?;
    out.csv("airy.csv", &["z", "ai"], &rows)?;
    if p.paths {
        let mut table = Vec::new();
        let mut plot = Plot::new("steepest-descent branches", "Re s", "Im s").equal_aspect();
        for &z in &zs {
            let phase = PolynomialPhase::airy(z);
            let saddle = Complex64::new(0.0, z.sqrt());
            for (b, d) in phase.descent_directions(saddle).into_iter().enumerate() {
                let path = trace_steepest_path(&phase, saddle, d)
                    .map_err(|e| anyhow!("tracing branch {b} at z = {z}: {e}"))?;
                for (k, s) in path.points.iter().enumerate() {
                    table.push(vec![
                        num(z),
                        b.to_string(),
                        k.to_string(),
                        num(s.re),
                        num(s.im),
                    ]);
                }
                plot.line(
                    &format!("z = {z}, branch {b}"),
                    path.points.iter().map(|s| (s.re, s.im)).collect(),
                );
            }
        }
        out.csv("paths.csv", &["z", "branch", "sample", "re", "im"], &table)?;
        out.svg("paths.svg", plot.render());
    }
    Ok(Status::Complete)
}
