//! Saddle points, steepest-descent paths and the Airy integral.
//!
//! The integrand is `exp(i·scale·h(t))`. Along a steepest-descent path the
//! exponent `i·scale·(h(t) - h(s₀))` is real and decreasing, so `Re h` is
//! conserved and `|exp(i·scale·h)|` decays monotonically away from the
//! saddle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

/// Polynomial `h(t) = Σ c_k t^k` (ascending coefficients) multiplying `i·scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPhase {
    pub coefficients: Vec<Complex64>,
    pub scale: f64,
}

impl PolynomialPhase {
    pub fn new(coefficients: Vec<Complex64>, scale: f64) -> Result<Self> {
        let mut c = coefficients;
        while c.len() > 1 && c.last().is_some_and(|x| x.norm() == 0.0) {
            c.pop();
        }
        if c.len() < 3 {
            return Err(Error::invalid("phase must have degree at least 2"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid("scale must be positive"));
        }
        Ok(Self {
            coefficients: c,
            scale,
        })
    }

    pub fn from_real(coefficients: &[f64], scale: f64) -> Result<Self> {
        Self::new(
            coefficients
                .iter()
                .map(|&c| Complex64::new(c, 0.0))
                .collect(),
            scale,
        )
    }

    /// `s³/3 + z s`, the Airy phase.
    pub fn airy(z: f64) -> Self {
        Self::from_real(&[0.0, z, 0.0, 1.0 / 3.0], 1.0).expect("cubic")
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `h^{(k)}(t)`.
    pub fn derivative(&self, k: usize, t: Complex64) -> Complex64 {
        let n = self.coefficients.len();
        if k >= n {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in (k..n).rev() {
            let mut fac = 1.0;
            for m in 0..k {
                fac *= (j - m) as f64;
            }
            acc = acc * t + self.coefficients[j] * fac;
        }
        acc
    }

    pub fn eval(&self, t: Complex64) -> Complex64 {
        self.derivative(0, t)
    }

    /// Order of the first nonvanishing derivative at `t` (2 at a simple saddle).
    pub fn saddle_order(&self, t: Complex64) -> usize {
        let scale = self
            .coefficients
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            * (1.0 + t.norm()).powi(self.degree() as i32);
        for m in 2..=self.degree() {
            if self.derivative(m, t).norm() > 1e-8 * scale {
                return m;
            }
        }
        self.degree()
    }

    /// Directions `d` with `arg(i·h^{(m)}(s₀)·d^m) = π`, sorted by argument.
    pub fn descent_directions(&self, saddle: Complex64) -> Vec<Complex64> {
        let m = self.saddle_order(saddle);
        let a = Complex64::i() * self.derivative(m, saddle);
        // d^m = -|a|/a  =>  arg d = (π - arg a + 2πk)/m
        let base = std::f64::consts::PI - a.arg();
        let mut dirs: Vec<Complex64> = (0..m)
            .map(|k| {
                let th = (base + 2.0 * std::f64::consts::PI * k as f64) / m as f64;
                Complex64::from_polar(1.0, th)
            })
            .collect();
        dirs.sort_by(|x, y| x.arg().total_cmp(&y.arg()));
        dirs
    }
}

/// All critical points of `h`, polished by Newton; repeated roots appear once.
pub fn saddle_points(phase: &PolynomialPhase) -> Vec<Complex64> {
    let n = phase.degree();
    // h'(t) = Σ_{k=1}^{n} k c_k t^{k-1}, degree n - 1
    let d: Vec<Complex64> = (1..=n).map(|k| phase.coefficients[k] * k as f64).collect();
    let deg = n - 1;
    let mut roots: Vec<Complex64> = if deg == 1 {
        vec![-d[0] / d[1]]
    } else {
        let lead = d[deg];
        let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
        for i in 1..deg {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..deg {
            comp[(i, deg - 1)] = -d[i] / lead;
        }
        comp.schur()
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_default()
    };
    for r in roots.iter_mut() {
        *r = polish(phase, *r);
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut out: Vec<Complex64> = Vec::new();
    for r in roots {
        if !out
            .iter()
            .any(|q| (q - r).norm() <= 1e-7 * (1.0 + r.norm()))
        {
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    out
}

fn polish(phase: &PolynomialPhase, mut t: Complex64) -> Complex64 {
    // Newton on h' for simple roots; modified Newton once the order is known
    let m = phase.saddle_order(t) - 1;
    for _ in 0..60 {
        let f = phase.derivative(1, t);
        let df = phase.derivative(2, t);
        if df.norm() == 0.0 || f.norm() == 0.0 {
            break;
        }
        let step = f / df * m as f64;
        t -= step;
        if step.norm() <= 1e-16 * (1.0 + t.norm()) {
            break;
        }
    }
    t
}

/// Samples of a steepest-descent branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteepestPath {
    pub saddle: Complex64,
    pub direction: Complex64,
    pub order: usize,
    /// Path parameter `p` with `i·scale·(h(t) - h(s₀)) = -p^order`.
    pub parameters: Vec<f64>,
    pub points: Vec<Complex64>,
    /// Another saddle reached by the branch, if any.
    pub junction: Option<Complex64>,
}

impl SteepestPath {
    /// Largest deviation of `Re h` from its saddle value.
    pub fn phase_drift(&self, phase: &PolynomialPhase) -> f64 {
        let h0 = phase.eval(self.saddle).re;
        self.points
            .iter()
            .map(|&t| (phase.eval(t).re - h0).abs())
            .fold(0.0, f64::max)
    }
}

struct Tracer<'a> {
    phase: &'a PolynomialPhase,
    saddle: Complex64,
    h0: Complex64,
    order: usize,
    direction: Complex64,
    radius: f64,
}

impl<'a> Tracer<'a> {
    fn new(phase: &'a PolynomialPhase, saddle: Complex64, direction: Complex64) -> Result<Self> {
        if phase.derivative(1, saddle).norm() > 1e-8 * (1.0 + phase.eval(saddle).norm()) {
            return Err(Error::invalid("point is not a saddle of the phase"));
        }
        let order = phase.saddle_order(saddle);
        let a = Complex64::i() * phase.derivative(order, saddle);
        let d = direction / direction.norm();
        // descent requires Re(i h^{(m)} d^m) < 0 (|integrand| decreasing)
        if (a * d.powu(order as u32)).re >= 0.0 {
            return Err(Error::AscendingDirection);
        }
        let snapped = phase
            .descent_directions(saddle)
            .into_iter()
            .min_by(|x, y| (x - d).norm().total_cmp(&(y - d).norm()))
            .expect("at least two directions");
        let mut fact = 1.0;
        for k in 2..=order {
            fact *= k as f64;
        }
        let radius = (fact / (phase.scale * a.norm())).powf(1.0 / order as f64);
        Ok(Self {
            phase,
            saddle,
            h0: phase.eval(saddle),
            order,
            direction: snapped,
            radius,
        })
    }

    fn residual(&self, t: Complex64, p: f64) -> Complex64 {
        Complex64::i() * self.phase.scale * (self.phase.eval(t) - self.h0)
            + p.powi(self.order as i32)
    }

    /// Solves for the path point at parameter `p` starting from `guess`.
    fn solve(&self, p: f64, guess: Complex64) -> Result<Complex64> {
        let mut t = guess;
        let target = p.powi(self.order as i32);
        for _ in 0..50 {
            let f = self.residual(t, p);
            let df = Complex64::i() * self.phase.scale * self.phase.derivative(1, t);
            if df.norm() == 0.0 {
                return Err(Error::PathTracing(
                    "stationary point met during correction".into(),
                ));
            }
            let step = f / df;
            t -= step;
            if f.norm() <= 1e-15 * (1.0 + target) || step.norm() <= 1e-16 * (1.0 + t.norm()) {
                let f = self.residual(t, p);
                if f.norm() > 1e-9 * (1.0 + target) {
                    return Err(Error::PathTracing(format!("corrector stalled at p = {p}")));
                }
                return Ok(t);
            }
        }
        Err(Error::PathTracing(format!(
            "corrector did not converge at p = {p}"
        )))
    }

    fn tangent(&self, t: Complex64, p: f64) -> Complex64 {
        // dt/dp = -m p^{m-1} / (i·scale·h'(t))
        let m = self.order as f64;
        let hp = self.phase.derivative(1, t);
        if p == 0.0 || hp.norm() == 0.0 {
            return self.direction * self.radius;
        }
        -(m * p.powi(self.order as i32 - 1)) / (Complex64::i() * self.phase.scale * hp)
    }

    /// Path points at increasing parameters, continued from the saddle.
    fn points_at(&self, params: &[f64]) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(params.len());
        let mut prev_p = 0.0;
        let mut prev_t = self.saddle;
        for &p in params {
            let mut t = prev_t;
            let mut q = prev_p;
            // substep so each predictor is local
            let sub =
                (((p - q) / (0.05 * self.radius.max(1e-300))).ceil() as usize).clamp(1, 10_000);
            let dq = (p - q) / sub as f64;
            for _ in 0..sub {
                let guess = if q == 0.0 {
                    self.saddle + self.direction * self.radius * (q + dq)
                } else {
                    t + self.tangent(t, q) * dq
                };
                q += dq;
                t = self.solve(q, guess)?;
            }
            out.push(t);
            prev_p = p;
            prev_t = t;
        }
        Ok(out)
    }

    fn cutoff(&self) -> f64 {
        // |integrand| = e^{-p^m} relative to the saddle value
        (18.0 * std::f64::consts::LN_10).powf(1.0 / self.order as f64)
    }
}

/// Traces the steepest-descent branch leaving `saddle` along `direction`
/// until the integrand has decayed by `1e-18` or `|t|` exceeds `t_max`.
pub fn trace_steepest_path(
    phase: &PolynomialPhase,
    saddle: Complex64,
    direction: Complex64,
) -> Result<SteepestPath> {
    let tr = Tracer::new(phase, saddle, direction)?;
    let p_max = tr.cutoff();
    let samples = 200;
    let params: Vec<f64> = (1..=samples)
        .map(|k| p_max * k as f64 / samples as f64)
        .collect();
    let mut points = tr.points_at(&params)?;
    let mut parameters = params;
    points.insert(0, saddle);
    parameters.insert(0, 0.0);
    let others: Vec<Complex64> = saddle_points(phase)
        .into_iter()
        .filter(|s| (s - saddle).norm() > 1e-8)
        .collect();
    let mut junction = None;
    for (k, t) in points.iter().enumerate().skip(1) {
        if let Some(s) = others
            .iter()
            .find(|s| (*s - t).norm() < 1e-6 * (1.0 + s.norm()))
        {
            junction = Some(*s);
            points.truncate(k + 1);
            parameters.truncate(k + 1);
            break;
        }
    }
    Ok(SteepestPath {
        saddle,
        direction: tr.direction,
        order: tr.order,
        parameters,
        points,
        junction,
    })
}

/// `∫ exp(i·scale·h(t)) dt` along the descent branch from the saddle to
/// infinity, with `panels` Gauss-Legendre panels of `nodes` points each.
pub fn branch_integral(
    phase: &PolynomialPhase,
    saddle: Complex64,
    direction: Complex64,
    panels: usize,
    nodes: usize,
) -> Result<Complex64> {
    let tr = Tracer::new(phase, saddle, direction)?;
    let p_max = tr.cutoff();
    let gl = GaussLegendre::new(nodes);
    let mut params = Vec::with_capacity(panels * nodes);
    let mut wts = Vec::with_capacity(panels * nodes);
    for k in 0..panels {
        let a = p_max * k as f64 / panels as f64;
        let b = p_max * (k + 1) as f64 / panels as f64;
        for (p, w) in gl.mapped(a, b) {
            params.push(p);
            wts.push(w);
        }
    }
    let pts = tr.points_at(&params)?;
    let m = tr.order as i32;
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&p, &w), &t) in params.iter().zip(&wts).zip(&pts) {
        let dtdp = tr.tangent(t, p);
        acc += dtdp * ((-p.powi(m)).exp() * w);
    }
    Ok(acc * (Complex64::i() * phase.scale * tr.h0).exp())
}

/// Airy function for `z ≥ 0` from the deformed contour through the upper
/// saddle `i√z` of `s³/3 + z s`.
pub fn airy_deformed(z: f64) -> Result<f64> {
    airy_deformed_with(z, 16, 24)
}

/// As [`airy_deformed`] with an explicit panel count and rule size.
pub fn airy_deformed_with(z: f64, panels: usize, nodes: usize) -> Result<f64> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::invalid("airy_deformed requires z >= 0"));
    }
    let phase = PolynomialPhase::airy(z);
    let saddle = Complex64::new(0.0, z.sqrt());
    let dirs = phase.descent_directions(saddle);
    // the real-line contour runs from the left asymptote to the right one;
    // pick the branches leaving toward the upper half-plane sides
    let right = dirs
        .iter()
        .copied()
        .filter(|d| d.im > -1e-12)
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| Error::PathTracing("no right descent direction".into()))?;
    let left = dirs
        .iter()
        .copied()
        .filter(|d| d.im > -1e-12)
        .min_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| Error::PathTracing("no left descent direction".into()))?;
    let ir = branch_integral(&phase, saddle, right, panels, nodes)?;
    let il = branch_integral(&phase, saddle, left, panels, nodes)?;
    Ok(((ir - il) / (2.0 * std::f64::consts::PI)).re)
}
