//! Independent reference values for the acceptance suite.

/// Maclaurin series of Ai, compensated summation.
pub fn airy_series(z: f64) -> f64 {
    const AI0: f64 = 0.355_028_053_887_817_239_26;
    const AIP0: f64 = 0.258_819_403_792_806_798_40;
    let z3 = z * z * z;
    let (mut f, mut g) = (1.0, z);
    let (mut fs, mut gs) = (Kahan::default(), Kahan::default());
    fs.add(f);
    gs.add(g);
    for k in 1..400 {
        let k = k as f64;
        f *= z3 / ((3.0 * k - 1.0) * (3.0 * k));
        g *= z3 / ((3.0 * k) * (3.0 * k + 1.0));
        fs.add(f);
        gs.add(g);
        if f.abs() < 1e-30 && g.abs() < 1e-30 {
            break;
        }
    }
    AI0 * fs.value() - AIP0 * gs.value()
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.c += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

#[cfg(test)]
mod tests {
    use super::airy_series;

    #[test]
    fn tabulated_values() {
        // Abramowitz and Stegun, table 10.11
        for (z, ai) in [
            (0.0, 0.355_028_053_887_817_2),
            (1.0, 0.135_292_416_312_881_4),
            (-1.0, 0.535_560_883_292_352_1),
            (2.0, 0.034_924_130_423_274_38),
        ] {
            assert!((airy_series(z) - ai).abs() < 1e-15, "z = {z}");
        }
    }
}
