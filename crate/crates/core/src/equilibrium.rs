//! Equilibrium measures on a fixed contour.
//!
//! The discrete problem is the nonnegatively constrained quadratic program
//! `min wᵀKw + 2fᵀw`, `0 ≤ w ≤ cap`, where `K` is the cell-averaged Green
//! kernel and `f` the cell-averaged field.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    kernel_matrix, Contour, DiscreteMeasure, FieldSpec, MeasureKind, MeshPlan, SlitPoint,
};

/// Starting point of the inner solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    /// Independent uniform weights from a seeded generator.
    Random(u64),
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Cells per contour when no explicit plan is given.
    pub nodes: usize,
    pub plan: Option<MeshPlan>,
    pub energy_tol: f64,
    /// Absolute tolerance on the gradient `Kw + f` at termination.
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub projected_gradient_steps: usize,
    /// Relative weight threshold for "supported".
    pub support_threshold: f64,
    /// Optional upper bound on the density (weight / cell length).
    pub density_cap: Option<f64>,
    pub initial: InitialGuess,
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nodes: 400,
            plan: None,
            energy_tol: 1e-10,
            kkt_tol: 1e-11,
            max_iter: 500,
            projected_gradient_steps: 60,
            support_threshold: 1e-8,
            density_cap: None,
            initial: InitialGuess::Zero,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Genus {
    Empty,
    Genus(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    /// Inclusive node-index intervals.
    pub bands: Vec<(usize, usize)>,
    pub gaps: Vec<(usize, usize)>,
    pub genus: Genus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub contour: Contour,
    pub measure: DiscreteMeasure,
    pub energy_value: f64,
    pub kkt_on_support: f64,
    pub kkt_off_support: f64,
    pub support_mask: Vec<bool>,
    pub bands: Vec<(usize, usize)>,
    pub iterations: usize,
    /// `V + φ` at every node.
    pub gradient: Vec<f64>,
    /// Largest negative weight clamped to zero.
    pub clamp_magnitude: f64,
    pub history: Vec<f64>,
    pub support_threshold: f64,
}

impl EquilibriumSolution {
    pub fn genus(&self) -> Genus {
        genus_of(&self.bands, self.measure.total_mass())
    }

    pub fn support(&self) -> Vec<SlitPoint> {
        self.measure
            .nodes
            .iter()
            .zip(&self.support_mask)
            .filter(|(_, &s)| s)
            .map(|(p, _)| *p)
            .collect()
    }
}

fn genus_of(bands: &[(usize, usize)], mass: f64) -> Genus {
    if bands.is_empty() || mass == 0.0 {
        Genus::Empty
    } else {
        Genus::Genus(bands.len() - 1)
    }
}

fn runs(mask: &[bool], value: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m == value, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len() - 1));
    }
    out
}

fn support_mask(w: &[f64], threshold: f64) -> Vec<bool> {
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    w.iter()
        .map(|&x| wmax > 0.0 && x > threshold * wmax)
        .collect()
}

/// Equilibrium measure of `field` on `contour`.
pub fn solve_equilibrium(
    contour: &Contour,
    field: &FieldSpec,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    let plan = match &opts.plan {
        Some(p) => p.clone(),
        None => MeshPlan::proportional(contour, opts.nodes),
    };
    let template = contour.mesh(&plan)?;
    if template.len() < 8 {
        return Err(Error::invalid(format!(
            "contour meshes to {} nodes, at least 8 are needed",
            template.len()
        )));
    }
    solve_on_measure(contour, &template, field, opts)
}

/// Equilibrium weights on the nodes of `template` (its weights are ignored).
pub fn solve_on_measure(
    contour: &Contour,
    template: &DiscreteMeasure,
    field: &FieldSpec,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution> {
    if template.len() < 2 {
        return Err(Error::invalid("need at least two nodes"));
    }
    let a = field.spike_height();
    for p in &template.nodes {
        p.validate(a)?;
    }
    let k = kernel_matrix(template)?;
    let f = DVector::from_vec(crate::potential::field_vector(template, field));
    let upper: Vec<f64> = match (opts.density_cap, template.kind) {
        (Some(cap), MeasureKind::Density) => {
            template.cell_lengths.iter().map(|l| cap * l).collect()
        }
        _ => vec![f64::INFINITY; template.len()],
    };
    let n = template.len();
    let w0 = match &opts.initial {
        InitialGuess::Zero => vec![0.0; n],
        InitialGuess::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|i| {
                    let scale = if template.is_density() {
                        template.cell_lengths[i]
                    } else {
                        1.0
                    };
                    (rng.gen::<f64>() * scale).min(upper[i])
                })
                .collect()
        }
        InitialGuess::Weights(w) => {
            if w.len() != n {
                return Err(Error::invalid("initial weights have the wrong length"));
            }
            w.iter()
                .zip(&upper)
                .map(|(x, u)| x.max(0.0).min(*u))
                .collect()
        }
    };
    let qp = BoxQp {
        k: &k,
        f: &f,
        upper: &upper,
    };
    let out = qp.solve(DVector::from_vec(w0), opts);
    let (w, iterations, history, converged) = out;
    let clamp_magnitude = w.iter().fold(0.0f64, |m, &x| m.max(-x));
    let weights: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    let wv = DVector::from_column_slice(&weights);
    let grad = &k * &wv + &f;
    let energy_value = wv.dot(&(&k * &wv)) + 2.0 * f.dot(&wv);
    let mask = support_mask(&weights, opts.support_threshold);
    let (on, off) = residuals_from_gradient(grad.as_slice(), &mask);
    let bands = runs(&mask, true);
    let measure = template.with_weights(weights)?;
    let sol = EquilibriumSolution {
        contour: contour.clone(),
        measure,
        energy_value,
        kkt_on_support: on,
        kkt_off_support: off,
        support_mask: mask,
        bands,
        iterations,
        gradient: grad.as_slice().to_vec(),
        clamp_magnitude,
        history,
        support_threshold: opts.support_threshold,
    };
    if converged {
        Ok(sol)
    } else {
        Err(Error::NonConvergence {
            iterations,
            best: Box::new(sol),
        })
    }
}

fn residuals_from_gradient(g: &[f64], mask: &[bool]) -> (f64, f64) {
    let mut on = 0.0f64;
    let mut off = f64::INFINITY;
    for (gi, &m) in g.iter().zip(mask) {
        if m {
            on = on.max(gi.abs());
        } else {
            off = off.min(*gi);
        }
    }
    (on, if off.is_finite() { off } else { 0.0 })
}

struct BoxQp<'a> {
    k: &'a DMatrix<f64>,
    f: &'a DVector<f64>,
    upper: &'a [f64],
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Lower,
    Free,
    Upper,
}

impl BoxQp<'_> {
    fn value(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(self.k * w)) + 2.0 * self.f.dot(w)
    }

    fn project(&self, w: &mut DVector<f64>) {
        for (x, u) in w.iter_mut().zip(self.upper) {
            *x = x.max(0.0).min(*u);
        }
    }

    fn solve(
        &self,
        mut w: DVector<f64>,
        opts: &SolverOptions,
    ) -> (DVector<f64>, usize, Vec<f64>, bool) {
        let n = w.len();
        let mut history = Vec::new();
        let mut q = self.value(&w);
        if opts.record_history {
            history.push(q);
        }
        // projected gradient with Armijo backtracking
        let lmax = (0..n)
            .map(|i| self.k.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1e-300);
        let mut step = 1.0 / lmax;
        let mut iterations = 0;
        for _ in 0..opts.projected_gradient_steps {
            iterations += 1;
            let g = self.k * &w + self.f;
            let mut accepted = false;
            let mut alpha = 4.0 * step;
            for _ in 0..40 {
                let mut trial = &w - &g * alpha;
                self.project(&mut trial);
                let d = &trial - &w;
                let qt = self.value(&trial);
                if qt <= q + 1e-4 * 2.0 * g.dot(&d) {
                    if d.norm() == 0.0 {
                        break;
                    }
                    w = trial;
                    q = qt;
                    step = alpha;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if opts.record_history {
                history.push(q);
            }
            if !accepted {
                break;
            }
        }
        // active-set polish
        let g = self.k * &w + self.f;
        let mut state: Vec<State> = (0..n)
            .map(|i| {
                if w[i] <= 0.0 && g[i] >= 0.0 {
                    w[i] = 0.0;
                    State::Lower
                } else if w[i] >= self.upper[i] && g[i] <= 0.0 {
                    w[i] = self.upper[i];
                    State::Upper
                } else {
                    State::Free
                }
            })
            .collect();
        let tol = opts.kkt_tol * (1.0 + self.f.amax());
        let mut converged = false;
        for _ in 0..opts.max_iter {
            iterations += 1;
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == State::Free).collect();
            if !free.is_empty() {
                let target = match self.subspace_minimizer(&w, &state, &free) {
                    Some(t) => t,
                    None => break,
                };
                // largest feasible step toward the subspace minimizer
                let mut t_max = 1.0;
                let mut blocking = None;
                for (idx, &i) in free.iter().enumerate() {
                    let d = target[idx] - w[i];
                    if d < 0.0 && target[idx] < 0.0 {
                        let t = w[i] / -d;
                        if t < t_max {
                            t_max = t;
                            blocking = Some((i, State::Lower));
                        }
                    } else if d > 0.0 && target[idx] > self.upper[i] {
                        let t = (self.upper[i] - w[i]) / d;
                        if t < t_max {
                            t_max = t;
                            blocking = Some((i, State::Upper));
                        }
                    }
                }
                for (idx, &i) in free.iter().enumerate() {
                    w[i] += t_max * (target[idx] - w[i]);
                }
                if let Some((i, s)) = blocking {
                    state[i] = s;
                    w[i] = if s == State::Lower {
                        0.0
                    } else {
                        self.upper[i]
                    };
                    for &j in &free {
                        if w[j] < 0.0 {
                            w[j] = 0.0;
                            state[j] = State::Lower;
                        }
                    }
                    let qn = self.value(&w);
                    q = qn.min(q);
                    if opts.record_history {
                        history.push(qn);
                    }
                    continue;
                }
                q = self.value(&w);
                if opts.record_history {
                    history.push(q);
                }
            }
            let g = self.k * &w + self.f;
            let mut released = false;
            for i in 0..n {
                let violated = match state[i] {
                    State::Lower => g[i] < -tol,
                    State::Upper => g[i] > tol,
                    State::Free => false,
                };
                if violated {
                    state[i] = State::Free;
                    released = true;
                }
            }
            if !released {
                let free_ok = (0..n)
                    .filter(|&i| state[i] == State::Free)
                    .all(|i| g[i].abs() <= tol.max(1e-9 * (1.0 + g.amax())));
                converged = free_ok;
                break;
            }
        }
        let _ = q;
        (w, iterations, history, converged)
    }

    fn subspace_minimizer(
        &self,
        w: &DVector<f64>,
        state: &[State],
        free: &[usize],
    ) -> Option<Vec<f64>> {
        let m = free.len();
        let n = w.len();
        let mut kff = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kff[(a, b)] = self.k[(i, j)];
            }
            let mut r = -self.f[i];
            for j in 0..n {
                if state[j] == State::Upper {
                    r -= self.k[(i, j)] * self.upper[j];
                }
            }
            rhs[a] = r;
        }
        let chol = Cholesky::new(kff)?;
        Some(chol.solve(&rhs).iter().copied().collect())
    }
}

/// `(on_support, off_support)`: max `|V + φ|` on the support and min `V + φ`
/// off it, recomputed from the measure.
pub fn kkt_residual(sol: &EquilibriumSolution, field: &FieldSpec) -> Result<(f64, f64)> {
    let k = kernel_matrix(&sol.measure)?;
    let w = DVector::from_column_slice(&sol.measure.weights);
    let f = DVector::from_vec(crate::potential::field_vector(&sol.measure, field));
    let g = &k * &w + f;
    Ok(residuals_from_gradient(g.as_slice(), &sol.support_mask))
}

/// Bands are maximal runs of nodes with weight above `threshold·max weight`.
pub fn classify_bands(sol: &EquilibriumSolution, threshold: f64) -> BandReport {
    let mask = support_mask(&sol.measure.weights, threshold);
    let bands = runs(&mask, true);
    let gaps = runs(&mask, false);
    let genus = genus_of(&bands, sol.measure.total_mass());
    BandReport { bands, gaps, genus }
}

fn cell_log_integral(z: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    // mean of Log(z - η) over the straight cell; where the cell crosses the
    // principal cut of Log(z - η) the two pieces take one-sided limits
    let e = b - a;
    let zeta_at = |s: f64| z - a - e * s;
    let anti = |zeta: Complex64, arg: f64| -> Complex64 {
        if zeta.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let log = Complex64::new(zeta.norm().ln(), arg);
        -(zeta * log - zeta) / e
    };
    let plain = |s: f64| {
        let zeta = zeta_at(s);
        anti(zeta, zeta.arg())
    };
    let dy = b.im - a.im;
    if dy != 0.0 {
        let s = (z.im - a.im) / dy;
        if s > 0.0 && s < 1.0 && (a + e * s).re > z.re {
            let zc = Complex64::new(zeta_at(s).re, 0.0);
            let pi = std::f64::consts::PI;
            let left = anti(zc, pi * dy.signum()) - plain(0.0);
            let right = plain(1.0) - anti(zc, -pi * dy.signum());
            return left + right;
        }
    }
    plain(1.0) - plain(0.0)
}

fn g_sum(z: Complex64, mu: &DiscreteMeasure, sign: f64, conj: bool) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..mu.len() {
        let w = mu.weights[j];
        if w == 0.0 {
            continue;
        }
        let term = if mu.is_density() {
            let (mut a, mut b) = (mu.cells[j][0], mu.cells[j][1]);
            if conj {
                a = a.conj();
                b = b.conj();
            }
            let far = (z - (a + b) * 0.5).norm() > 4.0 * (b - a).norm();
            if far && !crosses_cut(z, a, b) {
                let mid = (a + b) * 0.5;
                let e = b - a;
                (z - mid).ln() - e * e / (24.0 * (z - mid) * (z - mid))
            } else {
                cell_log_integral(z, a, b)
            }
        } else {
            let eta = if conj {
                mu.nodes[j].z().conj()
            } else {
                mu.nodes[j].z()
            };
            (z - eta).ln()
        };
        acc += sign * w * term;
    }
    acc
}

fn crosses_cut(z: Complex64, a: Complex64, b: Complex64) -> bool {
    let dy = b.im - a.im;
    if dy == 0.0 {
        return a.im == z.im && (a.re > z.re || b.re > z.re);
    }
    let s = (z.im - a.im) / dy;
    (0.0..=1.0).contains(&s) && (a + (b - a) * s).re > z.re
}

fn check_off_support(z: Complex64, sol: &EquilibriumSolution) -> Result<()> {
    let mu = &sol.measure;
    for j in 0..mu.len() {
        if !sol.support_mask[j] {
            continue;
        }
        let hit = if mu.is_density() {
            let c = &mu.cells[j];
            crate::potential::point_segment_distance(z, c[0], c[1]) <= 1e-14 * (1.0 + z.norm())
        } else {
            mu.nodes[j].z() == z
        };
        if hit {
            return Err(Error::OnSupport);
        }
    }
    Ok(())
}

/// `g(z) = ∫ Log(z - η) dμ(η)` with the principal branch for every node or
/// cell; the imaginary part is therefore defined modulo `2π·(mass)` and jumps
/// across horizontal rays to the left of the support.
pub fn g_function(z: &SlitPoint, sol: &EquilibriumSolution) -> Result<Complex64> {
    let zc = z.z();
    check_off_support(zc, sol)?;
    Ok(g_sum(zc, &sol.measure, 1.0, false))
}

/// `g` of the measure extended to the lower half-plane with `μ(z̄) = -μ(z)`.
pub fn g_function_symmetric(z: &SlitPoint, sol: &EquilibriumSolution) -> Result<Complex64> {
    let zc = z.z();
    check_off_support(zc, sol)?;
    Ok(g_sum(zc, &sol.measure, 1.0, false) + g_sum(zc, &sol.measure, -1.0, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{weighted_energy, SyntheticField};

    fn toy() -> (Contour, DiscreteMeasure, FieldSpec) {
        let nodes = vec![SlitPoint::new(0.0, 1.0), SlitPoint::new(0.0, 2.0)];
        let mu = DiscreteMeasure::point_masses(nodes, vec![0.0, 0.0], Some(1.0)).unwrap();
        let field = FieldSpec::Synthetic(SyntheticField::new(3.0, |z: Complex64| {
            if (z.im - 1.0).abs() < 1e-12 {
                -1.0
            } else {
                1.0
            }
        }));
        let contour =
            Contour::from_points(&[Complex64::new(0.0, 1.0), Complex64::new(0.0, 2.0)]).unwrap();
        (contour, mu, field)
    }

    #[test]
    fn two_node_toy_matches_coarse_grid() {
        let (c, mu, f) = toy();
        let sol = solve_on_measure(&c, &mu, &f, &SolverOptions::default()).unwrap();
        let g = 3f64.ln();
        let q = |a: f64, b: f64| a * a + b * b + 2.0 * g * a * b - 2.0 * a + 2.0 * b;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=2000 {
            for j in 0..=200 {
                let (a, b) = (i as f64 * 1e-3, j as f64 * 1e-2);
                let v = q(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        assert!((sol.measure.weights[0] - best.1).abs() < 1e-3);
        assert!((sol.measure.weights[1] - best.2).abs() < 1e-3);
        let (on, off) = kkt_residual(&sol, &f).unwrap();
        assert!(on <= 1e-9 && off >= -1e-9, "{on} {off}");
    }

    #[test]
    fn nonnegative_field_gives_zero_measure() {
        let c = Contour::test_arc(1.0, 9, 1e-3);
        let f = FieldSpec::Synthetic(SyntheticField::constant(1.0, 0.25));
        let opts = SolverOptions {
            nodes: 40,
            ..Default::default()
        };
        let sol = solve_equilibrium(&c, &f, &opts).unwrap();
        assert_eq!(sol.measure.total_mass(), 0.0);
        assert_eq!(sol.energy_value, 0.0);
        assert_eq!(classify_bands(&sol, 1e-8).genus, Genus::Empty);
        assert!((sol.kkt_off_support - 0.25).abs() < 1e-12);
        assert_eq!(sol.kkt_on_support, 0.0);
    }

    fn nls_solution(nodes: usize, initial: InitialGuess) -> (EquilibriumSolution, FieldSpec) {
        let c = Contour::test_arc(1.0, 21, 1e-3);
        let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
        let opts = SolverOptions {
            nodes,
            initial,
            record_history: true,
            ..Default::default()
        };
        (solve_equilibrium(&c, &f, &opts).unwrap(), f)
    }

    #[test]
    fn nls_arc_satisfies_kkt_and_descends_monotonically() {
        let (sol, f) = nls_solution(120, InitialGuess::Random(7));
        let (on, off) = kkt_residual(&sol, &f).unwrap();
        assert!(on <= 1e-6 && off >= -1e-6, "{on} {off}");
        assert!(sol
            .history
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
        let recomputed = weighted_energy(&sol.measure, &f).unwrap();
        assert!((recomputed - sol.energy_value).abs() <= 1e-12 * (1.0 + recomputed.abs()));
        assert!(sol.energy_value < 0.0);
        assert!(sol.clamp_magnitude <= 1e-14);
    }

    #[test]
    fn different_starts_agree() {
        let (a, _) = nls_solution(120, InitialGuess::Zero);
        let (b, _) = nls_solution(120, InitialGuess::Random(99));
        assert!((a.energy_value - b.energy_value).abs() <= 2e-10);
        let l1: f64 = a
            .measure
            .weights
            .iter()
            .zip(&b.measure.weights)
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(l1 <= 1e-3 * a.measure.total_mass());
    }

    #[test]
    fn perturbing_a_supported_weight_raises_energy() {
        let (sol, f) = nls_solution(80, InitialGuess::Zero);
        let i = sol.support_mask.iter().position(|&s| s).unwrap();
        let mut w = sol.measure.weights.clone();
        w[i] *= 1.01;
        let e = weighted_energy(&sol.measure.with_weights(w).unwrap(), &f).unwrap();
        assert!(e > sol.energy_value);
    }

    #[test]
    fn density_cap_is_respected() {
        let c = Contour::test_arc(1.0, 21, 1e-3);
        let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
        let free = solve_equilibrium(
            &c,
            &f,
            &SolverOptions {
                nodes: 80,
                ..Default::default()
            },
        )
        .unwrap();
        let peak = (0..free.measure.len())
            .map(|i| free.measure.density(i))
            .fold(0.0, f64::max);
        let cap = 0.5 * peak;
        let opts = SolverOptions {
            nodes: 80,
            density_cap: Some(cap),
            ..Default::default()
        };
        let capped = solve_equilibrium(&c, &f, &opts).unwrap();
        for i in 0..capped.measure.len() {
            assert!(capped.measure.density(i) <= cap * (1.0 + 1e-12));
        }
        assert!(capped.energy_value >= free.energy_value);
    }

    #[test]
    fn middle_third_is_one_band() {
        let (sol, _) = nls_solution(60, InitialGuess::Zero);
        let n = sol.measure.len();
        let w: Vec<f64> = (0..n)
            .map(|i| {
                if i >= n / 3 && i < 2 * n / 3 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let synthetic = EquilibriumSolution {
            measure: sol.measure.with_weights(w).unwrap(),
            ..sol
        };
        let r = classify_bands(&synthetic, 1e-8);
        assert_eq!(r.bands.len(), 1);
        assert_eq!(r.genus, Genus::Genus(0));
        assert_eq!(r.gaps.len(), 2);
    }

    #[test]
    fn g_function_far_field_and_symmetry() {
        let (sol, _) = nls_solution(80, InitialGuess::Zero);
        let mass = sol.measure.total_mass();
        let z = Complex64::new(6e5, 8e5);
        let g = g_function(&SlitPoint::from_complex(z), &sol).unwrap();
        let lead = mass * z.ln();
        assert!(((g - lead) / lead).norm() <= 1e-5);
        let p = SlitPoint::new(0.4, 2.3);
        let q = SlitPoint::new(0.4, -2.3);
        let gp = g_function_symmetric(&p, &sol).unwrap();
        let gq = g_function_symmetric(&q, &sol).unwrap();
        assert!((gp.re + gq.re).abs() < 1e-12);
        let v = crate::potential::green_potential_at(p.z(), &sol.measure);
        assert!((gp.re + v).abs() < 1e-6, "{} {}", gp.re, v);
    }

    #[test]
    fn single_atom_g_function() {
        let nodes = vec![SlitPoint::new(0.2, 0.5)];
        let mu = DiscreteMeasure::point_masses(nodes, vec![1.5], Some(1.0)).unwrap();
        let c =
            Contour::from_points(&[Complex64::new(0.2, 0.5), Complex64::new(0.3, 0.5)]).unwrap();
        let sol = EquilibriumSolution {
            contour: c,
            measure: mu,
            energy_value: 0.0,
            kkt_on_support: 0.0,
            kkt_off_support: 0.0,
            support_mask: vec![true],
            bands: vec![(0, 0)],
            iterations: 0,
            gradient: vec![0.0],
            clamp_magnitude: 0.0,
            history: vec![],
            support_threshold: 1e-8,
        };
        let z = Complex64::new(-40.0, -30.0);
        let g = g_function(&SlitPoint::from_complex(z), &sol).unwrap();
        assert!((g - 1.5 * (z - Complex64::new(0.2, 0.5)).ln()).norm() < 1e-14);
        assert!(matches!(
            g_function(&SlitPoint::new(0.2, 0.5), &sol),
            Err(Error::OnSupport)
        ));
    }
}
