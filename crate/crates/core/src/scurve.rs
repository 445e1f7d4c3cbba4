//! The outer maximin problem: maximize the equilibrium energy over contours
//! joining `0+` to `0-`, then check the S-property and the quadratic
//! differential band condition on the result.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    classify_bands, solve_on_measure, EquilibriumSolution, Genus, SolverOptions,
};
use crate::error::{Error, Result};
use crate::potential::{
    green_potential_at, slit_distance, Contour, DiscreteMeasure, FieldSpec, MeshPlan, SlitPoint,
};
use crate::quad::GaussLegendre;

/// Symmetric Hausdorff distance between two finite point sets under the
/// slit-aware metric.
pub fn hausdorff_distance(e: &[SlitPoint], f: &[SlitPoint], a: f64) -> Result<f64> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |p: &[SlitPoint], q: &[SlitPoint]| {
        p.iter()
            .map(|z| {
                q.iter()
                    .map(|w| slit_distance(z, w, a))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    Ok(directed(e, f).max(directed(f, e)))
}

/// Generator of `V'` in the quadratic differential `R_μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    /// Complex derivative of the external field, extended oddly to the lower
    /// half-plane.
    FieldDerivative,
    /// Cauchy transform `∫ dμ(u)/(z - u)` of the symmetrized measure.
    MeasurePotential,
}

impl GeneratorMode {
    pub const ALL: [GeneratorMode; 2] = [
        GeneratorMode::FieldDerivative,
        GeneratorMode::MeasurePotential,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Keep-out distance from the spike.
    pub delta: f64,
    /// Largest admissible energy gain of any probe at a converged contour.
    pub stationarity_tol: f64,
    /// Number of sine modes along arc length in the perturbation family.
    pub fourier_modes: usize,
    /// Include independent normal moves of every interior vertex.
    pub vertex_moves: bool,
    /// Initial line-search step, in units of the spike height.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub golden_iters: usize,
    /// Sweeps per family level before moving on.
    pub max_sweeps: usize,
    /// Certificate/polish rounds at the full family.
    pub max_rounds: usize,
    /// Probe amplitude for the certificate, in units of the spike height.
    pub probe_amplitude: f64,
    pub max_contacts: usize,
    /// Contact radius; `None` means twice the keep-out distance.
    pub contact_tol: Option<f64>,
    /// Fraction of each band excluded at both ends when probing.
    pub edge_exclusion: f64,
    /// Normal finite-difference step; `None` means `1e-4·A`.
    pub normal_step: Option<f64>,
    /// Require the contour and the base segment to wind once around the spike.
    pub encircling: bool,
    pub parallel: bool,
    pub record_iterates: bool,
    pub solver: SolverOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            stationarity_tol: 1e-6,
            fourier_modes: 6,
            vertex_moves: true,
            initial_step: 0.05,
            min_step: 1e-4,
            max_step: 0.5,
            golden_iters: 16,
            max_sweeps: 20,
            max_rounds: 8,
            probe_amplitude: 2e-3,
            max_contacts: 4,
            contact_tol: None,
            edge_exclusion: 0.1,
            normal_step: None,
            encircling: false,
            parallel: true,
            record_iterates: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Energy and S-property residual after one ascent sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub energy: f64,
    pub s_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandIntegrals {
    pub field_derivative: f64,
    pub measure_potential: f64,
}

impl BandIntegrals {
    pub fn get(&self, mode: GeneratorMode) -> f64 {
        match mode {
            GeneratorMode::FieldDerivative => self.field_derivative,
            GeneratorMode::MeasurePotential => self.measure_potential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurveResult {
    pub contour: Contour,
    pub solution: EquilibriumSolution,
    pub energy: f64,
    /// Max relative mismatch of the two normal derivatives of `φ + V` over
    /// band-interior probes; infinite if a band could not be probed.
    pub s_residual: f64,
    /// Smallest of the per-mode band integral residuals.
    pub band_integral_residual: f64,
    pub band_integrals: BandIntegrals,
    pub spike_contact: Vec<SlitPoint>,
    /// Largest energy gain found among the probe perturbations.
    pub local_max_certificate: f64,
    pub regularity_unproven: bool,
    pub converged: bool,
    pub evaluations: usize,
    pub sweeps: usize,
    pub iterates: Vec<Iterate>,
}

impl SCurveResult {
    pub fn genus(&self) -> Genus {
        self.solution.genus()
    }
}

/// A perturbation direction: a coefficient per interior vertex, applied along
/// the vertex normals of the contour it is attached to.
#[derive(Debug, Clone)]
struct Direction {
    coeffs: Vec<f64>,
}

fn fourier_direction(contour: &Contour, mode: usize) -> Direction {
    let lens = contour.segment_lengths();
    let total: f64 = lens.iter().sum();
    let mut s = 0.0;
    let mut coeffs = Vec::with_capacity(lens.len() - 1);
    for l in &lens[..lens.len() - 1] {
        s += l;
        coeffs.push((mode as f64 * PI * s / total).sin());
    }
    Direction { coeffs }
}

fn vertex_direction(contour: &Contour, k: usize) -> Direction {
    let mut coeffs = vec![0.0; contour.vertices.len() - 2];
    coeffs[k] = 1.0;
    Direction { coeffs }
}

/// Moves interior vertices by `alpha · coeff · normal`; anchors stay fixed.
fn displace(contour: &Contour, normals: &[Complex64], dir: &Direction, alpha: f64) -> Contour {
    let mut vertices = contour.vertices.clone();
    for (k, c) in dir.coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let z = vertices[k + 1].z() + normals[k] * (alpha * c);
        vertices[k + 1] = SlitPoint::from_complex(z);
    }
    Contour {
        vertices,
        closed: contour.closed,
    }
}

fn interior_normals(contour: &Contour) -> Vec<Complex64> {
    (1..contour.vertices.len() - 1)
        .map(|k| contour.vertex_normal(k))
        .collect()
}

fn winds_around_spike(contour: &Contour, a: f64) -> bool {
    let target = Complex64::new(0.0, 0.5 * a);
    let mut pts = contour.points();
    pts.push(pts[0]);
    let mut angle = 0.0;
    for w in pts.windows(2) {
        angle += ((w[1] - target) / (w[0] - target)).arg();
    }
    (angle.abs() - 2.0 * PI).abs() < 1e-6
}

struct Evaluator<'a> {
    field: &'a FieldSpec,
    plan: MeshPlan,
    opts: &'a SearchOptions,
    a: f64,
    counter: std::sync::atomic::AtomicUsize,
}

impl Evaluator<'_> {
    /// `Ok(None)` for an infeasible candidate.
    fn solve(&self, contour: &Contour) -> Result<Option<EquilibriumSolution>> {
        if contour
            .check_feasible(self.a, self.opts.delta * self.a)
            .is_err()
        {
            return Ok(None);
        }
        if self.opts.encircling && !winds_around_spike(contour, self.a) {
            return Ok(None);
        }
        self.counter
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let template = contour.mesh(&self.plan).map_err(|e| wrap(contour, e))?;
        solve_on_measure(contour, &template, self.field, &self.opts.solver)
            .map(Some)
            .map_err(|e| wrap(contour, e))
    }

    fn energy(&self, contour: &Contour) -> Result<f64> {
        Ok(self
            .solve(contour)?
            .map_or(f64::NEG_INFINITY, |s| s.energy_value))
    }

    fn energies(&self, contours: &[Contour]) -> Result<Vec<f64>> {
        if self.opts.parallel {
            contours.par_iter().map(|c| self.energy(c)).collect()
        } else {
            contours.iter().map(|c| self.energy(c)).collect()
        }
    }
}

fn wrap(contour: &Contour, e: Error) -> Error {
    Error::InnerSolver {
        candidate: Box::new(contour.clone()),
        source: Box::new(e),
    }
}

struct State {
    contour: Contour,
    energy: f64,
}

impl State {
    fn improve(&mut self, contour: Contour, energy: f64) -> bool {
        let eps = 1e-14 * (1.0 + self.energy.abs());
        if energy > self.energy + eps {
            self.contour = contour;
            self.energy = energy;
            true
        } else {
            false
        }
    }
}

/// Golden-section line search along one direction. Returns the gain and the
/// step actually taken.
fn line_search(
    ev: &Evaluator,
    state: &mut State,
    dir: &Direction,
    step: f64,
) -> Result<(f64, f64)> {
    let opts = ev.opts;
    let normals = interior_normals(&state.contour);
    let base = state.contour.clone();
    let e0 = state.energy;
    let at = |alpha: f64| displace(&base, &normals, dir, alpha * ev.a);
    let trial = [at(-step), at(step)];
    let ends = ev.energies(&trial)?;
    let (sign, mut eb) = if ends[1] >= ends[0] {
        (1.0, ends[1])
    } else {
        (-1.0, ends[0])
    };
    if eb <= e0 + 1e-14 * (1.0 + e0.abs()) {
        return Ok((0.0, 0.0));
    }
    // expand the bracket while the energy keeps rising
    let (mut lo, mut mid) = (0.0, step);
    let mut hi = 2.0 * step;
    let mut ehi = ev.energy(&at(sign * hi))?;
    while ehi > eb && hi < opts.max_step {
        lo = mid;
        mid = hi;
        eb = ehi;
        hi = (2.0 * hi).min(opts.max_step * 1.000_001);
        ehi = ev.energy(&at(sign * hi))?;
    }
    let mut best = (mid, eb);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let mut f1 = ev.energy(&at(sign * x1))?;
    let mut f2 = ev.energy(&at(sign * x2))?;
    for _ in 0..opts.golden_iters {
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > best.1 {
                best = (x, f);
            }
        }
        if hi - lo < 0.1 * opts.min_step {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = ev.energy(&at(sign * x1))?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = ev.energy(&at(sign * x2))?;
        }
    }
    for (x, f) in [(x1, f1), (x2, f2)] {
        if f > best.1 {
            best = (x, f);
        }
    }
    let gain = best.1 - e0;
    state.improve(at(sign * best.0), best.1);
    Ok((gain, best.0))
}

fn family(contour: &Contour, modes: usize, vertices: bool) -> Vec<Direction> {
    let mut dirs: Vec<Direction> = (1..=modes).map(|m| fourier_direction(contour, m)).collect();
    if vertices {
        dirs.extend((0..contour.vertices.len() - 2).map(|k| vertex_direction(contour, k)));
    }
    dirs
}

/// Maximin search over contours joining `0+` to `0-`.
///
/// The perturbation family is grown in nested levels (one sine mode at a
/// time, then the vertex moves); each level runs coordinate ascent with a
/// golden-section line search until a sweep gains less than a tenth of the
/// stationarity tolerance. A certificate round then probes every direction at
/// `±probe_amplitude`, takes a finite-difference gradient step if any probe
/// gains, and repeats.
pub fn maximin_search(
    initial: &Contour,
    field: &FieldSpec,
    opts: &SearchOptions,
) -> Result<SCurveResult> {
    validate_search(opts)?;
    let a = field.spike_height();
    initial.check_feasible(a, opts.delta * a)?;
    if opts.encircling && !winds_around_spike(initial, a) {
        return Err(Error::InfeasibleContour(
            "contour does not encircle the spike".into(),
        ));
    }
    if initial.vertices.len() < 3 {
        return Err(Error::invalid(
            "the contour needs at least one movable vertex",
        ));
    }
    let plan = match &opts.solver.plan {
        Some(p) => p.clone(),
        None => MeshPlan::proportional(initial, opts.solver.nodes),
    };
    let ev = Evaluator {
        field,
        plan,
        opts,
        a,
        counter: std::sync::atomic::AtomicUsize::new(0),
    };
    let e0 = ev.energy(initial)?;
    let mut state = State {
        contour: initial.clone(),
        energy: e0,
    };
    let tol = opts.stationarity_tol;
    let mut iterates = Vec::new();
    let mut sweeps = 0;
    let record = |state: &State, iterates: &mut Vec<Iterate>| -> Result<()> {
        if opts.record_iterates {
            let sol = ev
                .solve(&state.contour)?
                .expect("current contour is feasible");
            let s = s_property_residual(&sol, field, &residual_options(opts, a))
                .unwrap_or(f64::INFINITY);
            iterates.push(Iterate {
                energy: state.energy,
                s_residual: s,
            });
        }
        Ok(())
    };

    let mut levels: Vec<(usize, bool)> = (1..=opts.fourier_modes).map(|m| (m, false)).collect();
    if opts.vertex_moves {
        levels.push((opts.fourier_modes, true));
    }
    let mut steps: Vec<f64> = Vec::new();
    let mut certificate = 0.0;
    for &(modes, vertices) in &levels {
        let n_dirs = family(&state.contour, modes, vertices).len();
        steps.resize(n_dirs, opts.initial_step);
        for round in 0..opts.max_rounds.max(1) {
            for _ in 0..opts.max_sweeps {
                sweeps += 1;
                let start = state.energy;
                for (d, step) in steps.iter_mut().enumerate() {
                    // directions follow the current geometry
                    let dir = family_member(&state.contour, modes, d);
                    let (_, taken) = line_search(&ev, &mut state, &dir, *step)?;
                    *step = if taken > 0.0 {
                        taken.clamp(opts.min_step, opts.max_step)
                    } else {
                        (0.5 * *step).max(opts.min_step)
                    };
                }
                record(&state, &mut iterates)?;
                log::debug!(
                    "level ({modes}, {vertices}) sweep {sweeps}: E = {:.12}",
                    state.energy
                );
                if state.energy - start < 0.1 * tol {
                    break;
                }
            }
            certificate = certify(&ev, &mut state, modes, vertices, true)?;
            log::debug!("level ({modes}, {vertices}) round {round}: certificate {certificate:.3e}");
            if certificate <= tol {
                break;
            }
        }
    }
    if let Some(&(modes, vertices)) = levels.last() {
        if certificate > tol {
            // the last round moved; report the gain available at the final contour
            certificate = certify(&ev, &mut state, modes, vertices, false)?;
        }
    } else {
        certificate = 0.0;
    }

    let solution = ev
        .solve(&state.contour)?
        .expect("current contour is feasible");
    let converged = certificate <= tol;
    if !converged {
        log::warn!("maximin search stopped with certificate {certificate:.3e} > {tol:.3e}");
    }
    finish(
        state.contour,
        solution,
        field,
        opts,
        certificate,
        converged,
        &ev,
        sweeps,
        iterates,
    )
}

/// Probes every direction of the family at `±probe_amplitude`. Returns the
/// largest gain; if it exceeds the tolerance the state moves along the
/// finite-difference gradient (or to the best probe, whichever is higher).
fn certify(
    ev: &Evaluator,
    state: &mut State,
    modes: usize,
    vertices: bool,
    allow_move: bool,
) -> Result<f64> {
    let opts = ev.opts;
    let dirs = family(&state.contour, modes, vertices);
    let normals = interior_normals(&state.contour);
    let h = opts.probe_amplitude * ev.a;
    let probes: Vec<Contour> = dirs
        .iter()
        .flat_map(|d| {
            [
                displace(&state.contour, &normals, d, h),
                displace(&state.contour, &normals, d, -h),
            ]
        })
        .collect();
    let values = ev.energies(&probes)?;
    let gains: Vec<f64> = values.iter().map(|v| v - state.energy).collect();
    let certificate = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if certificate <= opts.stationarity_tol || !allow_move {
        return Ok(certificate);
    }
    // infeasible sides fall back to one-sided differences
    let mut coeffs = vec![0.0; state.contour.vertices.len() - 2];
    for (i, d) in dirs.iter().enumerate() {
        let (ep, em) = (values[2 * i], values[2 * i + 1]);
        let slope = match (ep.is_finite(), em.is_finite()) {
            (true, true) => (ep - em) / (2.0 * h),
            (true, false) => (ep - state.energy) / h,
            (false, true) => (state.energy - em) / h,
            _ => 0.0,
        };
        for (c, dc) in coeffs.iter_mut().zip(&d.coeffs) {
            *c += slope * dc;
        }
    }
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        let dir = Direction {
            coeffs: coeffs.iter().map(|c| c / norm).collect(),
        };
        line_search(ev, state, &dir, opts.initial_step)?;
    }
    let best = gains
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("non-empty family");
    state.improve(probes[best].clone(), values[best]);
    Ok(certificate)
}

fn family_member(contour: &Contour, modes: usize, d: usize) -> Direction {
    if d < modes {
        fourier_direction(contour, d + 1)
    } else {
        vertex_direction(contour, d - modes)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    contour: Contour,
    solution: EquilibriumSolution,
    field: &FieldSpec,
    opts: &SearchOptions,
    certificate: f64,
    converged: bool,
    ev: &Evaluator,
    sweeps: usize,
    iterates: Vec<Iterate>,
) -> Result<SCurveResult> {
    let a = field.spike_height();
    let has_band = !solution.bands.is_empty() && solution.measure.total_mass() > 0.0;
    let (s_residual, band_integrals) = if has_band {
        let s = match s_property_residual(&solution, field, &residual_options(opts, a)) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("S-property residual unavailable: {e}");
                f64::INFINITY
            }
        };
        let fd = band_integral_residual(&solution, field, GeneratorMode::FieldDerivative)?;
        let mp = band_integral_residual(&solution, field, GeneratorMode::MeasurePotential)?;
        (
            s,
            BandIntegrals {
                field_derivative: fd,
                measure_potential: mp,
            },
        )
    } else {
        (
            0.0,
            BandIntegrals {
                field_derivative: 0.0,
                measure_potential: 0.0,
            },
        )
    };
    let contact_tol = opts.contact_tol.unwrap_or(2.0 * opts.delta) * a;
    let spike_contact = sampled_contacts(&contour, a, contact_tol);
    let regularity_unproven = spike_contact.len() > opts.max_contacts;
    if regularity_unproven {
        log::warn!(
            "{} spike contacts: regularity unproven",
            spike_contact.len()
        );
    }
    Ok(SCurveResult {
        energy: solution.energy_value,
        contour,
        solution,
        s_residual,
        band_integral_residual: band_integrals
            .field_derivative
            .min(band_integrals.measure_potential),
        band_integrals,
        spike_contact,
        local_max_certificate: certificate,
        regularity_unproven,
        converged,
        evaluations: ev.counter.load(std::sync::atomic::Ordering::Relaxed),
        sweeps,
        iterates,
    })
}

/// Contour samples (spacing `tol`) within `tol` of the spike, away from the
/// anchors. A contour running along the spike yields one point per `tol` of
/// arc length, so extended contact exceeds any fixed contact budget.
pub fn sampled_contacts(contour: &Contour, a: f64, tol: f64) -> Vec<SlitPoint> {
    let (first, last) = contour.anchors();
    contour
        .sample(tol)
        .into_iter()
        .filter(|p| {
            let z = p.z();
            (z - first.z()).norm() > 2.0 * tol
                && (z - last.z()).norm() > 2.0 * tol
                && crate::potential::spike_distance(z, a) <= tol
        })
        .collect()
}

fn validate_search(opts: &SearchOptions) -> Result<()> {
    let positive = [
        ("delta", opts.delta),
        ("stationarity_tol", opts.stationarity_tol),
        ("initial_step", opts.initial_step),
        ("min_step", opts.min_step),
        ("max_step", opts.max_step),
        ("probe_amplitude", opts.probe_amplitude),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if !(0.0..0.5).contains(&opts.edge_exclusion) {
        return Err(Error::invalid("edge_exclusion must lie in [0, 0.5)"));
    }
    Ok(())
}

/// Options for the S-property probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualOptions {
    pub edge_exclusion: f64,
    pub normal_step: f64,
    /// Fewest probe nodes a band must offer.
    pub min_probes: usize,
}

impl ResidualOptions {
    pub fn for_height(a: f64) -> Self {
        Self {
            edge_exclusion: 0.1,
            normal_step: 1e-4 * a,
            min_probes: 3,
        }
    }
}

fn residual_options(opts: &SearchOptions, a: f64) -> ResidualOptions {
    ResidualOptions {
        edge_exclusion: opts.edge_exclusion,
        normal_step: opts.normal_step.unwrap_or(1e-4 * a),
        min_probes: 3,
    }
}

/// Probe nodes of every band: indices whose arc position lies inside the band
/// minus `edge_exclusion` of its length at each end.
fn band_probes(
    sol: &EquilibriumSolution,
    edge_exclusion: f64,
    min_probes: usize,
) -> Result<Vec<usize>> {
    let mu = &sol.measure;
    let mut out = Vec::new();
    for &(b0, b1) in &sol.bands {
        let mut pos = Vec::with_capacity(b1 - b0 + 1);
        let mut s = 0.0;
        for i in b0..=b1 {
            pos.push(s + 0.5 * mu.cell_lengths[i]);
            s += mu.cell_lengths[i];
        }
        let lo = edge_exclusion * s;
        let hi = (1.0 - edge_exclusion) * s;
        let picked: Vec<usize> = (b0..=b1)
            .filter(|&i| pos[i - b0] >= lo && pos[i - b0] <= hi)
            .collect();
        if picked.len() < min_probes {
            return Err(Error::BandUnderResolved {
                nodes: picked.len(),
            });
        }
        out.extend(picked);
    }
    if out.is_empty() {
        return Err(Error::BandUnderResolved { nodes: 0 });
    }
    Ok(out)
}

fn cell_normal(mu: &DiscreteMeasure, i: usize) -> Complex64 {
    let e = mu.cells[i][1] - mu.cells[i][0];
    e / e.norm() * Complex64::i()
}

fn s_mismatch(field: &FieldSpec, mu: &DiscreteMeasure, probes: &[usize], h: f64) -> f64 {
    let total = |z: Complex64| field.value(z) + green_potential_at(z, mu);
    probes
        .iter()
        .map(|&i| {
            let z = mu.nodes[i].z();
            let n = cell_normal(mu, i);
            let f0 = total(z);
            let one_sided = |dir: Complex64| {
                (-3.0 * f0 + 4.0 * total(z + dir * h) - total(z + dir * (2.0 * h))) / (2.0 * h)
            };
            let dp = one_sided(n);
            let dm = one_sided(-n);
            let scale = 0.5 * (dp.abs() + dm.abs());
            if scale == 0.0 {
                0.0
            } else {
                (dp - dm).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// S-property residual of an equilibrium solution: the largest relative
/// mismatch between the two outward normal derivatives of `φ + V` at band
/// interior nodes.
///
/// The step is halved until two successive estimates agree to 20%; a warning
/// is logged if that never happens within four halvings.
pub fn s_property_residual(
    sol: &EquilibriumSolution,
    field: &FieldSpec,
    opts: &ResidualOptions,
) -> Result<f64> {
    if !(opts.normal_step > 0.0) {
        return Err(Error::invalid("normal step must be positive"));
    }
    let probes = band_probes(sol, opts.edge_exclusion, opts.min_probes)?;
    let mut h = opts.normal_step;
    let mut prev = s_mismatch(field, &sol.measure, &probes, h);
    for _ in 0..4 {
        h *= 0.5;
        let next = s_mismatch(field, &sol.measure, &probes, h);
        let settled = (next - prev).abs() <= 0.2 * prev.max(next) || prev.max(next) < 1e-8;
        prev = next;
        if settled {
            return Ok(next);
        }
    }
    log::warn!("S-property residual did not settle under step halving");
    Ok(prev)
}

/// Quadrature points of the measure extended to the lower half-plane by
/// `μ(z̄) = -μ(z)`; each point carries its cell for the Cauchy transform.
struct SymmetricMeasure {
    points: Vec<Complex64>,
    weights: Vec<f64>,
    cells: Vec<Option<(Complex64, Complex64, f64)>>,
}

impl SymmetricMeasure {
    fn new(mu: &DiscreteMeasure) -> Self {
        let gl = GaussLegendre::new(4);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut cells = Vec::new();
        for j in 0..mu.len() {
            let w = mu.weights[j];
            if w == 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                if mu.is_density() {
                    let [mut a, mut b] = mu.cells[j];
                    if sign < 0.0 {
                        a = a.conj();
                        b = b.conj();
                    }
                    let rho = sign * w / mu.cell_lengths[j];
                    for (x, wx) in gl.nodes.iter().zip(&gl.weights) {
                        points.push(a + (b - a) * (0.5 * (x + 1.0)));
                        weights.push(sign * w * 0.5 * wx);
                        cells.push(Some((a, b, rho)));
                    }
                } else {
                    let u = mu.nodes[j].z();
                    points.push(if sign > 0.0 { u } else { u.conj() });
                    weights.push(sign * w);
                    cells.push(None);
                }
            }
        }
        Self {
            points,
            weights,
            cells,
        }
    }

    /// `∫ dμ(u)/(z - u)`; on a cell the principal value is used.
    fn cauchy(&self, z: Complex64, mu: &DiscreteMeasure) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        if mu.is_density() {
            // one cell entry per 4 quadrature points
            for c in self.cells.iter().step_by(4).flatten() {
                let (a, b, rho) = *c;
                let e = b - a;
                let ratio = (z - a) / (z - b);
                let log = if ratio.re < 0.0 && ratio.im.abs() <= 1e-12 * ratio.norm() {
                    Complex64::new((-ratio.re).ln(), 0.0)
                } else {
                    ratio.ln()
                };
                acc += log * (rho * e.norm() / e);
            }
        } else {
            for (u, w) in self.points.iter().zip(&self.weights) {
                if *u != z {
                    acc += *w / (z - u);
                }
            }
        }
        acc
    }
}

fn generator(
    z: Complex64,
    field: &FieldSpec,
    sym: &SymmetricMeasure,
    mu: &DiscreteMeasure,
    mode: GeneratorMode,
) -> Complex64 {
    match mode {
        GeneratorMode::FieldDerivative => {
            if z.im >= 0.0 {
                field.derivative(z)
            } else {
                -field.derivative(z.conj()).conj()
            }
        }
        GeneratorMode::MeasurePotential => sym.cauchy(z, mu),
    }
}

fn on_support(z: Complex64, sol: &EquilibriumSolution) -> bool {
    let mu = &sol.measure;
    let tol = 1e-14 * (1.0 + z.norm());
    (0..mu.len()).any(|j| {
        if !sol.support_mask[j] {
            return false;
        }
        if mu.is_density() {
            let [a, b] = mu.cells[j];
            crate::potential::point_segment_distance(z, a, b) <= tol
                || crate::potential::point_segment_distance(z, a.conj(), b.conj()) <= tol
        } else {
            let u = mu.nodes[j].z();
            (z - u).norm() <= tol || (z - u.conj()).norm() <= tol
        }
    })
}

struct RContext<'a> {
    field: &'a FieldSpec,
    mu: &'a DiscreteMeasure,
    sym: SymmetricMeasure,
    vu: Vec<Complex64>,
    mode: GeneratorMode,
}

impl<'a> RContext<'a> {
    fn new(sol: &'a EquilibriumSolution, field: &'a FieldSpec, mode: GeneratorMode) -> Self {
        let sym = SymmetricMeasure::new(&sol.measure);
        let vu = sym
            .points
            .iter()
            .map(|&u| generator(u, field, &sym, &sol.measure, mode))
            .collect();
        Self {
            field,
            mu: &sol.measure,
            sym,
            vu,
            mode,
        }
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        let vz = generator(z, self.field, &self.sym, self.mu, self.mode);
        let mut quotient = Complex64::new(0.0, 0.0);
        let mut moment = Complex64::new(0.0, 0.0);
        for ((u, w), vu) in self.sym.points.iter().zip(&self.sym.weights).zip(&self.vu) {
            quotient += *w * (vz - vu) / (z - u);
            moment += *w * 2.0 * (u + z) * vu;
        }
        vz * vz - 2.0 * quotient + moment / (z * z)
    }
}

/// The quadratic differential
/// `R(z) = V'(z)² - 2∫(V'(z) - V'(u))/(z - u) dμ(u) + z⁻²∫2(u + z)V'(u) dμ(u)`
/// over the symmetrized measure.
pub fn r_function(
    z: Complex64,
    sol: &EquilibriumSolution,
    field: &FieldSpec,
    mode: GeneratorMode,
) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(Error::Pole);
    }
    if on_support(z, sol) {
        return Err(Error::OnSupport);
    }
    Ok(RContext::new(sol, field, mode).eval(z))
}

/// `max over bands |Re ∫ √R dz|`, integrating along each band just off its
/// left side with the square-root branch continued from the band's first
/// endpoint.
pub fn band_integral_residual(
    sol: &EquilibriumSolution,
    field: &FieldSpec,
    mode: GeneratorMode,
) -> Result<f64> {
    let mu = &sol.measure;
    if !mu.is_density() {
        return Err(Error::invalid("band integrals need a density measure"));
    }
    let ctx = RContext::new(sol, field, mode);
    let offset = 1e-8 * field.spike_height();
    let gl = GaussLegendre::new(4);
    let mut worst = 0.0f64;
    for &(b0, b1) in &sol.bands {
        let mut prev: Option<Complex64> = None;
        let mut acc = 0.0;
        for i in b0..=b1 {
            let [a, b] = mu.cells[i];
            let shift = cell_normal(mu, i) * offset;
            for (x, w) in gl.mapped(0.0, 1.0) {
                let z = a + (b - a) * x + shift;
                if z.norm() == 0.0 {
                    return Err(Error::Pole);
                }
                let mut root = ctx.eval(z).sqrt();
                if let Some(p) = prev {
                    if (root - p).norm() > (root + p).norm() {
                        root = -root;
                    }
                }
                prev = Some(root);
                acc += (root * (b - a)).re * w;
            }
        }
        worst = worst.max(acc.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausticOptions {
    pub search: SearchOptions,
    /// Start each cell from the contour of its already solved neighbour.
    pub warm_start: bool,
    pub parallel: bool,
    /// Vertices of the cold-start arc.
    pub initial_vertices: usize,
}

impl Default for CausticOptions {
    fn default() -> Self {
        // a coarser mesh than a single search: a sweep solves one search per cell
        let mut search = SearchOptions::default();
        search.solver.nodes = 160;
        Self {
            search,
            warm_start: true,
            parallel: true,
            initial_vertices: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausticCell {
    pub x: f64,
    pub t: f64,
    pub genus: Option<Genus>,
    pub energy: Option<f64>,
    pub spike_contact: bool,
    pub regularity_unproven: bool,
    pub converged: bool,
    pub error: Option<String>,
    pub contour: Option<Contour>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausticMap {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `cells[it][ix]`.
    pub cells: Vec<Vec<CausticCell>>,
    /// Cells whose genus differs from a computed horizontal or vertical
    /// neighbour.
    pub caustic_cells: Vec<(usize, usize)>,
}

impl CausticMap {
    pub fn genus_grid(&self) -> Vec<Vec<Option<Genus>>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| c.genus).collect())
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .filter(|c| c.error.is_some())
            .count()
    }
}

/// Genus of the maximin result over an `(x, t)` grid.
///
/// Cells are processed in Manhattan wavefronts from the cell nearest
/// `(x, t) = (0, t₀)`; with warm starts each cell starts from the contour of
/// its neighbour one step closer to that seed (in `x` first, then `t`).
/// Cells within one wavefront run in parallel. Failures are stored per cell.
pub fn caustic_map(
    field_base: &FieldSpec,
    x_grid: &[f64],
    t_grid: &[f64],
    opts: &CausticOptions,
) -> Result<CausticMap> {
    if x_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::invalid("caustic grids must be nonempty"));
    }
    if x_grid.iter().chain(t_grid).any(|v| !v.is_finite()) {
        return Err(Error::invalid("grid values must be finite"));
    }
    let a = field_base.spike_height();
    if !matches!(field_base, FieldSpec::Nls { .. }) {
        return Err(Error::invalid("caustic maps vary (x, t) of the NLS field"));
    }
    let nx = x_grid.len();
    let nt = t_grid.len();
    let seed_x = (0..nx)
        .min_by(|&i, &j| x_grid[i].abs().total_cmp(&x_grid[j].abs()))
        .expect("nonempty");
    let cold = Contour::test_arc(a, opts.initial_vertices.max(3), opts.search.delta * a * 2.0);
    let mut cells: Vec<Vec<Option<CausticCell>>> = vec![vec![None; nx]; nt];
    let max_d = (0..nx).map(|i| i.abs_diff(seed_x)).max().unwrap_or(0) + nt - 1;
    for d in 0..=max_d {
        let front: Vec<(usize, usize)> = (0..nt)
            .flat_map(|it| (0..nx).map(move |ix| (it, ix)))
            .filter(|&(it, ix)| ix.abs_diff(seed_x) + it == d)
            .collect();
        let run = |&(it, ix): &(usize, usize)| -> CausticCell {
            let start = if opts.warm_start {
                let parent = if ix != seed_x {
                    Some((it, if ix > seed_x { ix - 1 } else { ix + 1 }))
                } else if it > 0 {
                    Some((it - 1, ix))
                } else {
                    None
                };
                parent
                    .and_then(|(pt, px)| cells[pt][px].as_ref().and_then(|c| c.contour.clone()))
                    .unwrap_or_else(|| cold.clone())
            } else {
                cold.clone()
            };
            solve_cell(x_grid[ix], t_grid[it], a, &start, &opts.search)
        };
        let results: Vec<CausticCell> = if opts.parallel {
            front.par_iter().map(run).collect()
        } else {
            front.iter().map(run).collect()
        };
        for ((it, ix), cell) in front.into_iter().zip(results) {
            cells[it][ix] = Some(cell);
        }
    }
    let cells: Vec<Vec<CausticCell>> = cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| c.expect("every cell visited"))
                .collect()
        })
        .collect();
    let mut caustic_cells = Vec::new();
    for it in 0..nt {
        for ix in 0..nx {
            let g = cells[it][ix].genus;
            let differs = |jt: usize, jx: usize| {
                let h = cells[jt][jx].genus;
                g.is_some() && h.is_some() && g != h
            };
            let mut mark = false;
            if ix > 0 {
                mark |= differs(it, ix - 1);
            }
            if ix + 1 < nx {
                mark |= differs(it, ix + 1);
            }
            if it > 0 {
                mark |= differs(it - 1, ix);
            }
            if it + 1 < nt {
                mark |= differs(it + 1, ix);
            }
            if mark {
                caustic_cells.push((it, ix));
            }
        }
    }
    Ok(CausticMap {
        x_grid: x_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        cells,
        caustic_cells,
    })
}

fn solve_cell(x: f64, t: f64, a: f64, start: &Contour, opts: &SearchOptions) -> CausticCell {
    let empty = |error: String| CausticCell {
        x,
        t,
        genus: None,
        energy: None,
        spike_contact: false,
        regularity_unproven: false,
        converged: false,
        error: Some(error),
        contour: None,
    };
    let field = match FieldSpec::nls(x, t, a) {
        Ok(f) => f,
        Err(e) => return empty(e.to_string()),
    };
    let mut cell_opts = opts.clone();
    // cells already run in parallel
    cell_opts.parallel = false;
    match maximin_search(start, &field, &cell_opts) {
        Ok(res) => {
            let report = classify_bands(&res.solution, res.solution.support_threshold);
            CausticCell {
                x,
                t,
                genus: Some(report.genus),
                energy: Some(res.energy),
                spike_contact: !res.spike_contact.is_empty(),
                regularity_unproven: res.regularity_unproven,
                converged: res.converged,
                error: None,
                contour: Some(res.contour),
            }
        }
        Err(e) => empty(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hausdorff_on_the_real_line() {
        let e = [SlitPoint::new(0.0, 0.0)];
        let f = [SlitPoint::new(3.0, 0.0), SlitPoint::new(4.0, 0.0)];
        assert_eq!(hausdorff_distance(&e, &f, 1.0).unwrap(), 4.0);
        assert_eq!(hausdorff_distance(&f, &f, 1.0).unwrap(), 0.0);
        assert!(matches!(
            hausdorff_distance(&[], &f, 1.0),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn winding_of_the_test_arc() {
        let c = Contour::test_arc(1.0, 11, 1e-3);
        assert!(winds_around_spike(&c, 1.0));
    }

    #[test]
    fn fourier_modes_vanish_at_anchors() {
        let c = Contour::test_arc(1.0, 9, 1e-3);
        let d = fourier_direction(&c, 3);
        assert_eq!(d.coeffs.len(), 7);
        let moved = displace(&c, &interior_normals(&c), &d, 0.01);
        assert_eq!(moved.vertices[0], c.vertices[0]);
        assert_eq!(moved.vertices[8], c.vertices[8]);
    }
}
