#![allow(dead_code)]

/// Maclaurin series of Ai with Neumaier-compensated summation.
pub fn airy_series(z: f64) -> f64 {
    const AI0: f64 = 0.355_028_053_887_817_239_26;
    const AIP0: f64 = 0.258_819_403_792_806_798_40;
    let z3 = z * z * z;
    let mut f_term = 1.0;
    let mut g_term = z;
    let mut f = Neumaier::default();
    let mut g = Neumaier::default();
    f.add(f_term);
    g.add(g_term);
    for k in 1..400 {
        let kf = k as f64;
        f_term *= z3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        g_term *= z3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        f.add(f_term);
        g.add(g_term);
        if f_term.abs() < 1e-30 && g_term.abs() < 1e-30 {
            break;
        }
    }
    let mut out = Neumaier::default();
    out.add(AI0 * f.value());
    out.add(-AIP0 * g.value());
    out.value()
}

#[derive(Default)]
pub struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Tanh-sinh quadrature on `[a, b]`, robust to endpoint singularities.
/// Starts at step 1 and halves the step `levels` times.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, levels: usize) -> f64 {
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let node = |t: f64| -> f64 {
        let u = pi2 * t.sinh();
        let w = pi2 * t.cosh() / u.cosh().powi(2);
        // distance to the nearer endpoint, free of cancellation
        let gap = half / (u.abs().exp() * u.cosh());
        let x = if u >= 0.0 { b - gap } else { a + gap };
        if gap <= 0.0 || x <= a || x >= b {
            return 0.0;
        }
        let fx = f(x);
        if fx.is_finite() {
            w * fx
        } else {
            0.0
        }
    };
    let tmax = 6.5;
    let mut h = 1.0;
    let mut total: f64 = (-6..=6).map(|k| node(k as f64)).sum();
    for _ in 0..levels {
        h *= 0.5;
        let kmax = (tmax / h) as i64;
        let mut k = -kmax;
        while k <= kmax {
            if k.rem_euclid(2) == 1 {
                total += node(k as f64 * h);
            }
            k += 1;
        }
    }
    total * h * half
}
