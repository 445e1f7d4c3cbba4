use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::kernel::segment_log_potential;
use super::slit::SlitPoint;
use crate::error::{Error, Result};

type ValueFn = dyn Fn(Complex64) -> f64 + Send + Sync;
type DerivFn = dyn Fn(Complex64) -> Complex64 + Send + Sync;

/// User-supplied external field for tests and experiments.
#[derive(Clone)]
pub struct SyntheticField {
    pub a: f64,
    value: Arc<ValueFn>,
    derivative: Option<Arc<DerivFn>>,
}

impl SyntheticField {
    pub fn new(a: f64, value: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            a,
            value: Arc::new(value),
            derivative: None,
        }
    }

    /// Attaches the complex derivative `∂x φ - i ∂y φ`.
    pub fn with_derivative(
        mut self,
        d: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn constant(a: f64, c: f64) -> Self {
        Self::new(a, move |_| c).with_derivative(|_| Complex64::new(0.0, 0.0))
    }
}

impl fmt::Debug for SyntheticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntheticField")
            .field("a", &self.a)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// External field acting on measures in the slit domain.
#[derive(Debug, Clone)]
pub enum FieldSpec {
    /// The semiclassical NLS field with spike height `a` at `(x, t)`.
    Nls {
        x: f64,
        t: f64,
        a: f64,
    },
    Synthetic(SyntheticField),
}

impl FieldSpec {
    pub fn nls(x: f64, t: f64, a: f64) -> Result<Self> {
        if !(x.is_finite() && t.is_finite()) {
            return Err(Error::invalid("x and t must be finite"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "spike height must be positive, got {a}"
            )));
        }
        Ok(Self::Nls { x, t, a })
    }

    pub fn spike_height(&self) -> f64 {
        match self {
            Self::Nls { a, .. } => *a,
            Self::Synthetic(s) => s.a,
        }
    }

    /// Field value at a complex point, without domain checks.
    pub fn value(&self, z: Complex64) -> f64 {
        match self {
            Self::Nls { x, t, a } => {
                -spike_green_integral(z, *a) + PI * z.re + 2.0 * x * z.im + 4.0 * t * z.re * z.im
            }
            Self::Synthetic(s) => (s.value)(z),
        }
    }

    /// Complex derivative `∂x φ - i ∂y φ` of the field.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            Self::Nls { x, t, a } => nls_derivative(z, *x, *t, *a),
            Self::Synthetic(s) => match &s.derivative {
                Some(d) => d(z),
                None => {
                    let h = 1e-6 * (1.0 + z.norm());
                    let dx = ((s.value)(z + h) - (s.value)(z - h)) / (2.0 * h);
                    let ih = Complex64::new(0.0, h);
                    let dy = ((s.value)(z + ih) - (s.value)(z - ih)) / (2.0 * h);
                    Complex64::new(dx, -dy)
                }
            },
        }
    }

    /// Average of the field over the straight cell `[p, q]` (4-point Gauss).
    pub fn cell_average(&self, p: Complex64, q: Complex64) -> f64 {
        const X: [f64; 2] = [0.339_981_043_584_856_26, 0.861_136_311_594_052_6];
        const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_85];
        let mid = (p + q) * 0.5;
        let half = (q - p) * 0.5;
        let mut acc = 0.0;
        for k in 0..2 {
            acc += W[k] * (self.value(mid + half * X[k]) + self.value(mid - half * X[k]));
        }
        0.5 * acc
    }
}

/// `∫_0^A G(z, is) ds`, the potential of the unit density on the spike.
pub fn spike_green_integral(z: Complex64, a: f64) -> f64 {
    if z.im == 0.0 {
        return 0.0;
    }
    let o = Complex64::new(0.0, 0.0);
    let top = Complex64::new(0.0, a);
    a * (segment_log_potential(z, o, -top) - segment_log_potential(z, o, top))
}

fn nls_derivative(z: Complex64, x: f64, t: f64, a: f64) -> Complex64 {
    let i = Complex64::i();
    let ia = Complex64::new(0.0, a);
    let logs = ((z + ia) / z).ln() + ((z - ia) / z).ln();
    PI - 2.0 * i * x - 4.0 * i * t * z + i * logs
}

/// External field at a point of the slit domain.
pub fn external_field(z: &SlitPoint, field: &FieldSpec) -> Result<f64> {
    z.validate(field.spike_height())?;
    Ok(field.value(z.z()))
}

/// Complex derivative of the field; fails on the spike where it has its cut.
pub fn field_derivative(z: &SlitPoint, field: &FieldSpec) -> Result<Complex64> {
    let a = field.spike_height();
    z.validate(a)?;
    if z.re == 0.0 && z.im <= a {
        return Err(Error::SingularKernel { re: z.re, im: z.im });
    }
    Ok(field.derivative(z.z()))
}
