//! WKB phase integrals for small-dispersion KdV with a single-hump datum.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{adaptive, QuadResult};

type Profile = dyn Fn(f64) -> f64 + Send + Sync;

/// Positive single-hump initial datum of unit height.
#[derive(Clone)]
pub struct BumpProfile {
    eval: Arc<Profile>,
    /// `sup u₀`.
    pub height: f64,
    /// Location of the maximum.
    pub peak: f64,
    /// Exact `∫_X^∞ u₀`, when known.
    tail: Option<Arc<Profile>>,
}

impl fmt::Debug for BumpProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BumpProfile")
            .field("height", &self.height)
            .field("peak", &self.peak)
            .finish()
    }
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self::sech2()
    }
}

impl BumpProfile {
    /// `u₀(x) = sech² x`.
    pub fn sech2() -> Self {
        Self {
            eval: Arc::new(|x: f64| {
                let c = x.cosh();
                1.0 / (c * c)
            }),
            height: 1.0,
            peak: 0.0,
            tail: Some(Arc::new(|x: f64| {
                // 1 - tanh x without cancellation
                2.0 / (1.0 + (2.0 * x).exp())
            })),
        }
    }

    /// A user bump; it must be positive, decay at ±∞, have a single maximum
    /// at `peak` and height 1 there.
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, peak: f64) -> Result<Self> {
        let h = eval(peak);
        if (h - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("bump height must be 1, got {h}")));
        }
        for x in [peak - 1e3, peak + 1e3] {
            if eval(x).abs() > 1e-10 {
                return Err(Error::invalid("bump does not decay at infinity"));
            }
        }
        Ok(Self {
            eval: Arc::new(eval),
            height: 1.0,
            peak,
            tail: None,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    fn tail_integral(&self, x: f64) -> f64 {
        match &self.tail {
            Some(t) => t(x),
            None => {
                // exponential-decay estimate u₀(X)/|(log u₀)'(X)|
                let h = 1e-4 * (1.0 + x.abs());
                let u = self.eval(x);
                let slope = (self.eval(x + h).ln() - self.eval(x - h).ln()) / (2.0 * h);
                if slope < 0.0 && slope.is_finite() {
                    u / -slope
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_z(z: f64, u0: &BumpProfile) -> Result<()> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid(format!("z must be in (0, 1], got {z}")));
    }
    if z * z > u0.height * (1.0 + 1e-15) {
        return Err(Error::NoClassicalRegion { z });
    }
    Ok(())
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) > 0 >= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest and largest roots of `u₀(x) = z²`.
pub fn turning_points(z: f64, u0: &BumpProfile) -> Result<(f64, f64)> {
    check_z(z, u0)?;
    let z2 = z * z;
    let g = |x: f64| u0.eval(x) - z2;
    if g(u0.peak) <= 0.0 {
        return Ok((u0.peak, u0.peak));
    }
    let mut step = 1.0;
    while g(u0.peak + step) > 0.0 {
        step *= 2.0;
        if step > 1e6 {
            return Err(Error::invalid("bump does not fall below z² on the right"));
        }
    }
    let xp = bisect(g, u0.peak, u0.peak + step);
    let mut step = 1.0;
    while g(u0.peak - step) > 0.0 {
        step *= 2.0;
        if step > 1e6 {
            return Err(Error::invalid("bump does not fall below z² on the left"));
        }
    }
    let xm = bisect(g, u0.peak, u0.peak - step);
    Ok((xm, xp))
}

/// `τ(z) = ∫_{x₋}^{x₊} √(u₀ - z²) dx` with its error estimate.
pub fn tau_with_tol(z: f64, u0: &BumpProfile, tol: f64) -> Result<QuadResult> {
    let (xm, xp) = turning_points(z, u0)?;
    let len = xp - xm;
    if len == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let z2 = z * z;
    // x = x₋ + L(1 - cos θ)/2 removes both square-root endpoints
    let f = |th: f64| {
        let x = xm + 0.5 * len * (1.0 - th.cos());
        (u0.eval(x) - z2).max(0.0).sqrt() * 0.5 * len * th.sin()
    };
    Ok(adaptive(f, 0.0, std::f64::consts::PI, tol, tol, 4000))
}

pub fn tau(z: f64, u0: &BumpProfile) -> Result<f64> {
    Ok(tau_with_tol(z, u0, 1e-12)?.value)
}

/// `ρ(z) = x₊ z + ∫_{x₊}^∞ (z - √(z² - u₀)) dx` with its error estimate.
pub fn rho_with_tol(z: f64, u0: &BumpProfile, tol: f64) -> Result<QuadResult> {
    let (_, xp) = turning_points(z, u0)?;
    let z2 = z * z;
    // truncation point where u₀ < 1e-14 z²
    let mut big_x = xp + 1.0;
    while u0.eval(big_x) >= 1e-14 * z2 {
        big_x += 1.0 + 0.5 * (big_x - xp);
    }
    let s_max = (big_x - xp).sqrt();
    let f = |s: f64| {
        let x = xp + s * s;
        let u = u0.eval(x);
        let root = (z2 - u).max(0.0).sqrt();
        // z - √(z² - u) = u / (z + √(z² - u))
        2.0 * s * u / (z + root)
    };
    let body = adaptive(f, 0.0, s_max, tol, tol, 4000);
    let tail = u0.tail_integral(big_x) / (2.0 * z);
    Ok(QuadResult {
        value: xp * z + body.value + tail,
        error: body.error + 1e-14 * tail.abs(),
        evaluations: body.evaluations,
    })
}

pub fn rho(z: f64, u0: &BumpProfile) -> Result<f64> {
    Ok(rho_with_tol(z, u0, 1e-12)?.value)
}
