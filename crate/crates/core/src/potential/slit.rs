use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which bank of the spike `(0, iA]` a point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    OffSpike,
}

/// A point of the closed slit upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitPoint {
    pub re: f64,
    pub im: f64,
    pub side: Side,
}

impl SlitPoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self {
            re,
            im,
            side: Side::OffSpike,
        }
    }

    pub fn on_spike(im: f64, side: Side) -> Self {
        Self { re: 0.0, im, side }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }

    #[inline]
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// -1 for the left bank / left half, +1 for the right, 0 when neither
    /// (imaginary axis without a side tag).
    pub fn side_sign(&self) -> i8 {
        if self.re < 0.0 {
            -1
        } else if self.re > 0.0 {
            1
        } else {
            match self.side {
                Side::Left => -1,
                Side::Right => 1,
                Side::OffSpike => 0,
            }
        }
    }

    /// Checks the type invariants against the spike height `a`.
    pub fn validate(&self, a: f64) -> Result<()> {
        if !(self.re.is_finite() && self.im.is_finite()) {
            return Err(Error::invalid("non-finite slit point"));
        }
        if self.im < 0.0 {
            return Err(Error::invalid(format!(
                "slit point ({}, {}) below the real axis",
                self.re, self.im
            )));
        }
        if self.side != Side::OffSpike && !(self.re == 0.0 && self.im > 0.0 && self.im <= a) {
            return Err(Error::invalid(format!(
                "side tag {:?} on a point ({}, {}) that is not on the spike",
                self.side, self.re, self.im
            )));
        }
        Ok(())
    }
}

/// Euclidean distance from `z` to the spike segment `[0, iA]`.
pub fn spike_distance(z: Complex64, a: f64) -> f64 {
    let y = z.im.clamp(0.0, a);
    ((z.re).powi(2) + (z.im - y).powi(2)).sqrt()
}

/// Geodesic distance in the closure of the slit domain: the straight segment
/// unless it crosses the spike, in which case the path wraps the tip `iA`.
pub fn slit_distance(p: &SlitPoint, q: &SlitPoint, a: f64) -> f64 {
    let (zp, zq) = (p.z(), q.z());
    let sp = p.side_sign();
    let sq = q.side_sign();
    let crosses = if sp != 0 && sq != 0 && sp != sq {
        // height where the straight segment meets the imaginary axis
        let y = if zp.re == zq.re {
            zp.im.min(zq.im)
        } else {
            let s = zp.re / (zp.re - zq.re);
            zp.im + s * (zq.im - zp.im)
        };
        y < a
    } else {
        false
    };
    if crosses {
        let tip = Complex64::new(0.0, a);
        (zp - tip).norm() + (tip - zq).norm()
    } else {
        (zp - zq).norm()
    }
}

fn segment_segment_distance(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

pub(crate) fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a) * d.conj()).re / len2;
    let s = s.clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_intersect(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> bool {
    let d1 = cross(a1 - a0, b0 - a0);
    let d2 = cross(a1 - a0, b1 - a0);
    let d3 = cross(b1 - b0, a0 - b0);
    let d4 = cross(b1 - b0, a1 - b0);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Oriented polyline continuum from the `0+` anchor to the `0-` anchor.
///
/// `vertices[0]` is the anchor on the right bank of the origin and the last
/// vertex is the anchor on the left bank; both sit a distance `eps` from the
/// origin on the real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub vertices: Vec<SlitPoint>,
    pub closed: bool,
}

impl Contour {
    pub fn new(vertices: Vec<SlitPoint>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::invalid("a contour needs at least two vertices"));
        }
        for w in vertices.windows(2) {
            if w[0].z() == w[1].z() && w[0].side == w[1].side {
                return Err(Error::invalid("consecutive contour vertices coincide"));
            }
        }
        Ok(Self {
            vertices,
            closed: false,
        })
    }

    pub fn from_points(points: &[Complex64]) -> Result<Self> {
        Self::new(points.iter().map(|&z| SlitPoint::from_complex(z)).collect())
    }

    /// The `0+` and `0-` anchors.
    pub fn anchors(&self) -> (SlitPoint, SlitPoint) {
        (self.vertices[0], *self.vertices.last().expect("non-empty"))
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.vertices.iter().map(SlitPoint::z).collect()
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn segment(&self, k: usize) -> (Complex64, Complex64) {
        (self.vertices[k].z(), self.vertices[k + 1].z())
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        (0..self.segment_count())
            .map(|k| {
                let (a, b) = self.segment(k);
                (b - a).norm()
            })
            .collect()
    }

    pub fn arc_length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// Point at arc length `s` together with the unit tangent there.
    pub fn point_at(&self, s: f64) -> (Complex64, Complex64) {
        let lens = self.segment_lengths();
        let mut acc = 0.0;
        for (k, &l) in lens.iter().enumerate() {
            if s <= acc + l || k + 1 == lens.len() {
                let (a, b) = self.segment(k);
                let t = ((s - acc) / l).clamp(0.0, 1.0);
                return (a + (b - a) * t, (b - a) / l);
            }
            acc += l;
        }
        unreachable!("contour has at least one segment")
    }

    /// Smallest distance from any segment to the spike `[0, iA]`.
    pub fn spike_clearance(&self, a: f64) -> f64 {
        let s0 = Complex64::new(0.0, 0.0);
        let s1 = Complex64::new(0.0, a);
        (0..self.segment_count())
            .map(|k| {
                let (p, q) = self.segment(k);
                segment_segment_distance(p, q, s0, s1)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Feasibility: closed upper half-plane, keep-out `delta` from the spike,
    /// no self-intersections.
    pub fn check_feasible(&self, a: f64, delta: f64) -> Result<()> {
        for v in &self.vertices {
            v.validate(a)?;
        }
        let tol = delta * (1.0 - 1e-9);
        let s0 = Complex64::new(0.0, 0.0);
        let s1 = Complex64::new(0.0, a);
        let n = self.segment_count();
        for k in 0..n {
            let (p, q) = self.segment(k);
            let d = segment_segment_distance(p, q, s0, s1);
            if d < tol {
                return Err(Error::InfeasibleContour(format!(
                    "segment {k} comes within {d:.3e} of the spike (keep-out {delta:.3e})"
                )));
            }
        }
        for i in 0..n {
            for j in (i + 2)..n {
                let (p, q) = self.segment(i);
                let (r, s) = self.segment(j);
                if segments_intersect(p, q, r, s) {
                    return Err(Error::InfeasibleContour(format!(
                        "segments {i} and {j} intersect"
                    )));
                }
            }
        }
        let (first, last) = self.anchors();
        if !(first.re > 0.0 && last.re < 0.0) {
            return Err(Error::InfeasibleContour(
                "contour must run from the right bank of the origin to the left bank".into(),
            ));
        }
        Ok(())
    }

    /// Vertices within `contact_tol` of the spike.
    pub fn spike_contacts(&self, a: f64, contact_tol: f64) -> Vec<SlitPoint> {
        self.vertices[1..self.vertices.len() - 1]
            .iter()
            .filter(|v| spike_distance(v.z(), a) <= contact_tol)
            .copied()
            .collect()
    }

    /// Default starting arc: leaves `0+` to the right, passes over the tip at
    /// height `1.4 A` and returns to `0-`.
    pub fn test_arc(a: f64, n_vertices: usize, eps: f64) -> Self {
        Self::arc(a, n_vertices, eps, 0.8 * a, 1.4 * a)
    }

    /// Arc `x(θ) = cos θ (eps + width sin θ)`, `y(θ) = height sin θ` for
    /// `θ ∈ [0, π]`.
    pub fn arc(a: f64, n_vertices: usize, eps: f64, width: f64, height: f64) -> Self {
        assert!(n_vertices >= 3);
        assert!(height > a);
        let pts: Vec<Complex64> = (0..n_vertices)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / (n_vertices - 1) as f64;
                let x = th.cos() * (eps + width * th.sin());
                let y = height * th.sin();
                Complex64::new(
                    x,
                    if k == 0 || k == n_vertices - 1 {
                        0.0
                    } else {
                        y
                    },
                )
            })
            .collect();
        Self::from_points(&pts).expect("arc vertices are distinct")
    }

    /// Mirror image across the imaginary axis, re-oriented so it still runs
    /// from `0+` to `0-`.
    pub fn reflected(&self) -> Self {
        let vertices = self
            .vertices
            .iter()
            .rev()
            .map(|v| SlitPoint {
                re: -v.re,
                im: v.im,
                side: match v.side {
                    Side::Left => Side::Right,
                    Side::Right => Side::Left,
                    Side::OffSpike => Side::OffSpike,
                },
            })
            .collect();
        Self {
            vertices,
            closed: self.closed,
        }
    }

    /// Unit left normal of segment `k` (tangent rotated by +90°).
    pub fn segment_normal(&self, k: usize) -> Complex64 {
        let (a, b) = self.segment(k);
        let t = (b - a) / (b - a).norm();
        t * Complex64::i()
    }

    /// Averaged unit normal at interior vertex `k`.
    pub fn vertex_normal(&self, k: usize) -> Complex64 {
        let n = self.segment_count();
        let v = if k == 0 {
            self.segment_normal(0)
        } else if k >= n {
            self.segment_normal(n - 1)
        } else {
            self.segment_normal(k - 1) + self.segment_normal(k)
        };
        v / v.norm()
    }

    /// Polyline sampled at roughly `spacing` arc length.
    pub fn sample(&self, spacing: f64) -> Vec<SlitPoint> {
        let mut out = Vec::new();
        for k in 0..self.segment_count() {
            let (a, b) = self.segment(k);
            let m = (((b - a).norm() / spacing).ceil() as usize).max(1);
            for j in 0..m {
                let z = a + (b - a) * (j as f64 / m as f64);
                let mut p = SlitPoint::from_complex(z);
                if j == 0 {
                    p.side = self.vertices[k].side;
                }
                out.push(p);
            }
        }
        out.push(*self.vertices.last().expect("non-empty"));
        out
    }
}
