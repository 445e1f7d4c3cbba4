use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::field::FieldSpec;
use super::measure::{DiscreteMeasure, MeasureKind};
use super::slit::SlitPoint;
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

/// Dense symmetric interaction matrix of a discrete measure.
pub type KernelMatrix = DMatrix<f64>;

/// Green's function of the upper half-plane, `log |z - conj(η)| / |z - η|`.
pub fn green(z: &SlitPoint, eta: &SlitPoint) -> Result<f64> {
    if z.re == eta.re && z.im == eta.im {
        return Err(Error::SingularKernel { re: z.re, im: z.im });
    }
    Ok(green_complex(z.z(), eta.z()))
}

#[inline]
pub fn green_complex(z: Complex64, eta: Complex64) -> f64 {
    0.5 * ((z - eta.conj()).norm_sqr() / (z - eta).norm_sqr()).ln()
}

fn antiderivative(u: f64, y: f64) -> f64 {
    if y == 0.0 {
        if u == 0.0 {
            0.0
        } else {
            u * u.abs().ln() - u
        }
    } else {
        let ya = y.abs();
        let lg = if u == 0.0 {
            0.0
        } else {
            0.5 * u * (u * u + y * y).ln()
        };
        lg - u + ya * (u / ya).atan()
    }
}

/// Mean of `log |z - p|` over `p` on the straight segment `[a, b]`.
pub fn segment_log_potential(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len = d.norm();
    let e = d / len;
    let zeta = (z - a) * e.conj();
    (antiderivative(len - zeta.re, zeta.im) - antiderivative(-zeta.re, zeta.im)) / len
}

/// Mean of `log |s - u|` over a square of side `len`.
pub fn self_cell_log_average(len: f64) -> f64 {
    len.ln() - 1.5
}

#[derive(Clone, Copy)]
struct Cell {
    a: Complex64,
    b: Complex64,
    mid: Complex64,
    len: f64,
    e: Complex64,
}

impl Cell {
    fn new(c: &[Complex64; 2]) -> Self {
        let d = c[1] - c[0];
        let len = d.norm();
        Self {
            a: c[0],
            b: c[1],
            mid: (c[0] + c[1]) * 0.5,
            len,
            e: d / len,
        }
    }

    fn conj(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: self.b.conj(),
            mid: self.mid.conj(),
            len: self.len,
            e: self.e.conj(),
        }
    }

    fn distance_to(&self, other: &Cell) -> f64 {
        use super::slit::point_segment_distance as psd;
        psd(self.a, other.a, other.b)
            .min(psd(self.b, other.a, other.b))
            .min(psd(other.a, self.a, self.b))
            .min(psd(other.b, self.a, self.b))
    }
}

struct Rules {
    g8: GaussLegendre,
}

impl Rules {
    fn new() -> Self {
        Self {
            g8: GaussLegendre::new(8),
        }
    }

    /// Mean over `outer` of `f`. When the cells are close the outer cell is
    /// split where the endpoints of `near` project onto it, and each piece is
    /// graded geometrically toward its ends down to the local distance
    /// between the cells.
    fn outer_mean(&self, outer: &Cell, near: &Cell, f: impl Fn(Complex64) -> f64) -> f64 {
        use super::slit::point_segment_distance as psd;
        let gap = outer.distance_to(near);
        let on_segment = |t: f64| outer.a + (outer.b - outer.a) * t;
        let mean_on = |t0: f64, t1: f64| self.g8.integrate(t0, t1, |t| f(on_segment(t)));
        if gap > 0.25 * outer.len {
            return mean_on(0.0, 1.0);
        }
        let d = outer.b - outer.a;
        let proj = |p: Complex64| (((p - outer.a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
        let mut breaks = vec![0.0, 1.0, proj(near.a), proj(near.b)];
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        let local = |t: f64| psd(on_segment(t), near.a, near.b) / outer.len;
        // panels [end + L 4^-(k+1), end + L 4^-k], then the last piece at the end
        let graded = |end: f64, other: f64| {
            let span = other - end;
            let h = local(end);
            let levels = if h >= 0.25 * span.abs() {
                0
            } else {
                ((span.abs() / h.max(span.abs() * 4f64.powi(-16)))
                    .log(4.0)
                    .ceil() as i32)
                    .clamp(1, 16)
            };
            let mut acc = 0.0;
            let mut far = 1.0;
            for _ in 0..levels {
                let close = 0.25 * far;
                let (x0, x1) = (end + span * close, end + span * far);
                acc += mean_on(x0.min(x1), x0.max(x1));
                far = close;
            }
            let x1 = end + span * far;
            acc + mean_on(end.min(x1), end.max(x1))
        };
        breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                graded(w[0], mid) + graded(w[1], mid)
            })
            .sum()
    }
}

fn far_direct(ci: &Cell, cj: &Cell) -> f64 {
    let d = ci.mid - cj.mid;
    let corr = (ci.e * ci.e * ci.len * ci.len + cj.e * cj.e * cj.len * cj.len) / (d * d);
    -d.norm().ln() + corr.re / 24.0
}

fn far_image(ci: &Cell, cj: &Cell) -> f64 {
    let cj = cj.conj();
    let d = ci.mid - cj.mid;
    let corr = (ci.e * ci.e * ci.len * ci.len + cj.e * cj.e * cj.len * cj.len) / (d * d);
    d.norm().ln() - corr.re / 24.0
}

fn pair_average(rules: &Rules, ci: &Cell, cj: &Cell, same: bool, near_radius: f64) -> f64 {
    let r = ci.len.max(cj.len);
    let radius = near_radius.max(3.0 * r);
    let direct = if same {
        -self_cell_log_average(ci.len)
    } else if (ci.mid - cj.mid).norm() < radius {
        -rules.outer_mean(ci, cj, |z| segment_log_potential(z, cj.a, cj.b))
    } else {
        far_direct(ci, cj)
    };
    let cjc = cj.conj();
    let image = if (ci.mid - cjc.mid).norm() < radius {
        rules.outer_mean(ci, &cjc, |z| segment_log_potential(z, cjc.a, cjc.b))
    } else {
        far_image(ci, cj)
    };
    direct + image
}

fn near_radius_for(cells: &[Cell]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for c in cells {
        for p in [c.a, c.b] {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
    }
    0.05 * ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
}

fn check_point_masses(mu: &DiscreteMeasure) -> Result<Option<f64>> {
    let MeasureKind::PointMass { self_energy } = mu.kind else {
        return Ok(None);
    };
    for i in 0..mu.len() {
        for j in 0..i {
            if mu.nodes[i].re == mu.nodes[j].re && mu.nodes[i].im == mu.nodes[j].im {
                return Err(Error::InfiniteSelfEnergy { index: i });
            }
        }
    }
    match self_energy {
        Some(s) => Ok(Some(s)),
        None => Err(Error::InfiniteSelfEnergy {
            index: mu.weights.iter().position(|&w| w > 0.0).unwrap_or(0),
        }),
    }
}

/// Interaction matrix: cell-averaged Green's function for densities, the
/// regularized diagonal plus pointwise values for atoms.
pub fn kernel_matrix(mu: &DiscreteMeasure) -> Result<KernelMatrix> {
    let n = mu.len();
    if let Some(diag) = check_point_masses(mu)? {
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = diag;
            for j in 0..i {
                let g = green_complex(mu.nodes[i].z(), mu.nodes[j].z());
                k[(i, j)] = g;
                k[(j, i)] = g;
            }
        }
        return Ok(k);
    }
    let cells: Vec<Cell> = mu.cells.iter().map(Cell::new).collect();
    let radius = near_radius_for(&cells);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map_init(Rules::new, |rules, i| {
            (i..n)
                .map(|j| pair_average(rules, &cells[i], &cells[j], i == j, radius))
                .collect()
        })
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Potential of a density measure at an arbitrary point, treating each cell
/// as a uniform density on its segment.
pub fn green_potential_at(z: Complex64, mu: &DiscreteMeasure) -> f64 {
    if !mu.is_density() {
        return mu
            .nodes
            .iter()
            .zip(&mu.weights)
            .map(|(p, w)| w * green_complex(z, p.z()))
            .sum();
    }
    let cells: Vec<Cell> = mu.cells.iter().map(Cell::new).collect();
    let radius = near_radius_for(&cells);
    potential_from_cells(z, &cells, &mu.weights, radius)
}

fn potential_from_cells(z: Complex64, cells: &[Cell], w: &[f64], radius: f64) -> f64 {
    let mut acc = 0.0;
    for (c, &wj) in cells.iter().zip(w) {
        if wj == 0.0 {
            continue;
        }
        let rad = radius.max(3.0 * c.len);
        let d = z - c.mid;
        let direct = if d.norm() < rad {
            -segment_log_potential(z, c.a, c.b)
        } else {
            -d.norm().ln() + (c.e * c.e * c.len * c.len / (d * d)).re / 24.0
        };
        let cc = c.conj();
        let di = z - cc.mid;
        let image = if di.norm() < rad {
            segment_log_potential(z, cc.a, cc.b)
        } else {
            di.norm().ln() - (cc.e * cc.e * cc.len * cc.len / (di * di)).re / 24.0
        };
        acc += wj * (direct + image);
    }
    acc
}

/// Logarithmic potential `V^μ(z) = ∫ G(z, η) dμ(η)`.
///
/// For atoms a coincident node is an error. At a node of a density measure
/// the cell-averaged value consistent with [`energy`] is returned.
pub fn green_potential(z: &SlitPoint, mu: &DiscreteMeasure) -> Result<f64> {
    match mu.kind {
        MeasureKind::PointMass { .. } => {
            let mut acc = 0.0;
            for (p, w) in mu.nodes.iter().zip(&mu.weights) {
                acc += w * green(z, p)?;
            }
            Ok(acc)
        }
        MeasureKind::Density => {
            if let Some(i) = mu.nodes.iter().position(|p| p.re == z.re && p.im == z.im) {
                let cells: Vec<Cell> = mu.cells.iter().map(Cell::new).collect();
                let radius = near_radius_for(&cells);
                let rules = Rules::new();
                Ok((0..mu.len())
                    .map(|j| {
                        mu.weights[j] * pair_average(&rules, &cells[i], &cells[j], i == j, radius)
                    })
                    .sum())
            } else {
                Ok(green_potential_at(z.z(), mu))
            }
        }
    }
}

/// `∬ G dμ dμ`.
pub fn energy(mu: &DiscreteMeasure) -> Result<f64> {
    let k = kernel_matrix(mu)?;
    let w = nalgebra::DVector::from_column_slice(&mu.weights);
    Ok(w.dot(&(&k * &w)))
}

/// Field values paired with the nodes: cell averages for densities.
pub(crate) fn field_vector(mu: &DiscreteMeasure, field: &FieldSpec) -> Vec<f64> {
    if mu.is_density() {
        mu.cells
            .iter()
            .map(|c| field.cell_average(c[0], c[1]))
            .collect()
    } else {
        mu.nodes.iter().map(|p| field.value(p.z())).collect()
    }
}

/// `E(μ) + 2 ∫ φ dμ`.
pub fn weighted_energy(mu: &DiscreteMeasure, field: &FieldSpec) -> Result<f64> {
    let a = field.spike_height();
    for p in &mu.nodes {
        p.validate(a)?;
    }
    let e = energy(mu)?;
    let f = field_vector(mu, field);
    Ok(e + 2.0 * f.iter().zip(&mu.weights).map(|(f, w)| f * w).sum::<f64>())
}
