use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::slit::{Contour, SlitPoint};
use crate::error::{Error, Result};

/// How the weights of a [`DiscreteMeasure`] are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum MeasureKind {
    /// Piecewise-constant density on straight cells.
    Density,
    /// Atoms. The self-energy of an atom is infinite unless a regularized
    /// diagonal value is supplied.
    PointMass { self_energy: Option<f64> },
}

/// Finite positive measure supported on nodes of the slit domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub nodes: Vec<SlitPoint>,
    pub weights: Vec<f64>,
    pub cell_lengths: Vec<f64>,
    /// Cell endpoints, parallel to `nodes`; empty for point masses.
    pub cells: Vec<[Complex64; 2]>,
    pub kind: MeasureKind,
}

impl DiscreteMeasure {
    pub fn point_masses(
        nodes: Vec<SlitPoint>,
        weights: Vec<f64>,
        self_energy: Option<f64>,
    ) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::invalid("nodes and weights differ in length"));
        }
        check_weights(&weights)?;
        let n = nodes.len();
        Ok(Self {
            nodes,
            weights,
            cell_lengths: vec![0.0; n],
            cells: Vec::new(),
            kind: MeasureKind::PointMass { self_energy },
        })
    }

    /// Density measure on straight cells with the given total cell weights.
    pub fn from_cells(cells: Vec<[Complex64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if cells.len() != weights.len() {
            return Err(Error::invalid("cells and weights differ in length"));
        }
        check_weights(&weights)?;
        let mut nodes = Vec::with_capacity(cells.len());
        let mut cell_lengths = Vec::with_capacity(cells.len());
        for c in &cells {
            let l = (c[1] - c[0]).norm();
            if l <= 0.0 {
                return Err(Error::invalid("degenerate cell"));
            }
            nodes.push(SlitPoint::from_complex((c[0] + c[1]) * 0.5));
            cell_lengths.push(l);
        }
        Ok(Self {
            nodes,
            weights,
            cell_lengths,
            cells,
            kind: MeasureKind::Density,
        })
    }

    /// Uniform density `rho` on the straight segment `[a, b]` split into `n`
    /// equal cells.
    pub fn uniform_segment(a: Complex64, b: Complex64, n: usize, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one cell"));
        }
        let cells: Vec<[Complex64; 2]> = (0..n)
            .map(|k| {
                let s0 = k as f64 / n as f64;
                let s1 = (k + 1) as f64 / n as f64;
                [a + (b - a) * s0, a + (b - a) * s1]
            })
            .collect();
        let w = rho * (b - a).norm() / n as f64;
        Self::from_cells(cells, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_density(&self) -> bool {
        matches!(self.kind, MeasureKind::Density)
    }

    /// Density value `w_i / ℓ_i` on cell `i`.
    pub fn density(&self, i: usize) -> f64 {
        self.weights[i] / self.cell_lengths[i]
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::invalid("weight vector has the wrong length"));
        }
        check_weights(&weights)?;
        Ok(Self {
            weights,
            ..self.clone()
        })
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(format!(
            "weight {i} is negative or not finite"
        )));
    }
    Ok(())
}

/// Distribution of cells inside one polyline segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentGrading {
    Uniform,
    /// `u ↦ u^p`: cells shrink toward the segment start.
    ClusterStart(f64),
    /// Cells shrink toward the segment end.
    ClusterEnd(f64),
    /// Equidistribution of `1 + Σ 1/sqrt(|u - c|/h + 1)·strength` over the
    /// listed local positions `c ∈ [0, 1]`.
    Refined {
        centers: Vec<f64>,
        scale: f64,
    },
}

impl SegmentGrading {
    fn boundaries(&self, m: usize) -> Vec<f64> {
        let uniform = |k: usize| k as f64 / m as f64;
        match self {
            SegmentGrading::Uniform => (0..=m).map(uniform).collect(),
            SegmentGrading::ClusterStart(p) => (0..=m).map(|k| uniform(k).powf(*p)).collect(),
            SegmentGrading::ClusterEnd(p) => {
                (0..=m).map(|k| 1.0 - (1.0 - uniform(k)).powf(*p)).collect()
            }
            SegmentGrading::Refined { centers, scale } => {
                let samples = 4096;
                let g = |u: f64| {
                    1.0 + centers
                        .iter()
                        .map(|c| 4.0 / ((u - c).abs() / scale + 1.0).sqrt())
                        .sum::<f64>()
                };
                let mut cum = vec![0.0; samples + 1];
                for j in 0..samples {
                    let u0 = j as f64 / samples as f64;
                    let u1 = (j + 1) as f64 / samples as f64;
                    cum[j + 1] = cum[j] + 0.5 * (g(u0) + g(u1)) / samples as f64;
                }
                let total = cum[samples];
                let mut out = Vec::with_capacity(m + 1);
                let mut j = 0;
                for k in 0..=m {
                    let target = total * k as f64 / m as f64;
                    while j < samples && cum[j + 1] < target {
                        j += 1;
                    }
                    if k == 0 {
                        out.push(0.0);
                    } else if k == m {
                        out.push(1.0);
                    } else {
                        let frac = (target - cum[j]) / (cum[j + 1] - cum[j]);
                        out.push((j as f64 + frac) / samples as f64);
                    }
                }
                out
            }
        }
    }
}

/// Number of cells and their grading per polyline segment.
///
/// Keeping the plan fixed while vertices move makes the discretized energy a
/// continuous function of the vertex positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshPlan {
    pub per_segment: Vec<usize>,
    pub grading: Vec<SegmentGrading>,
}

impl MeshPlan {
    /// About `n` cells in total, allocated by segment length, graded toward
    /// both anchors.
    pub fn proportional(contour: &Contour, n: usize) -> Self {
        let lens = contour.segment_lengths();
        let total: f64 = lens.iter().sum();
        let k = lens.len();
        let mut per_segment: Vec<usize> = lens
            .iter()
            .map(|l| ((n as f64 * l / total).round() as usize).max(1))
            .collect();
        // nudge the largest segments until the total matches
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| lens[b].total_cmp(&lens[a]));
        let mut sum: usize = per_segment.iter().sum();
        let mut idx = 0;
        while sum != n && n >= k {
            let s = order[idx % k];
            if sum < n {
                per_segment[s] += 1;
                sum += 1;
            } else if per_segment[s] > 1 {
                per_segment[s] -= 1;
                sum -= 1;
            }
            idx += 1;
            if idx > 16 * k + n {
                break;
            }
        }
        let mut grading = vec![SegmentGrading::Uniform; k];
        if k == 1 {
            grading[0] = SegmentGrading::Uniform;
        } else {
            grading[0] = SegmentGrading::ClusterStart(2.0);
            grading[k - 1] = SegmentGrading::ClusterEnd(2.0);
        }
        Self {
            per_segment,
            grading,
        }
    }

    pub fn uniform(contour: &Contour, n: usize) -> Self {
        let mut p = Self::proportional(contour, n);
        p.grading
            .iter_mut()
            .for_each(|g| *g = SegmentGrading::Uniform);
        p
    }

    /// Adds clustering around the given arc-length positions.
    pub fn refined(contour: &Contour, n: usize, arc_positions: &[f64]) -> Self {
        let mut p = Self::proportional(contour, n);
        let lens = contour.segment_lengths();
        let mut acc = 0.0;
        for (k, &l) in lens.iter().enumerate() {
            let centers: Vec<f64> = arc_positions
                .iter()
                .filter(|&&s| s >= acc - 1e-12 && s <= acc + l + 1e-12)
                .map(|&s| ((s - acc) / l).clamp(0.0, 1.0))
                .collect();
            if !centers.is_empty() {
                p.per_segment[k] *= 2;
                p.grading[k] = SegmentGrading::Refined {
                    centers,
                    scale: 0.01,
                };
            }
            acc += l;
        }
        p
    }

    pub fn total(&self) -> usize {
        self.per_segment.iter().sum()
    }
}

impl Contour {
    /// Straight cells of the contour with zero weights.
    pub fn mesh(&self, plan: &MeshPlan) -> Result<DiscreteMeasure> {
        if plan.per_segment.len() != self.segment_count() {
            return Err(Error::invalid(format!(
                "mesh plan has {} segments, contour has {}",
                plan.per_segment.len(),
                self.segment_count()
            )));
        }
        let mut cells = Vec::with_capacity(plan.total());
        for (k, (&m, g)) in plan.per_segment.iter().zip(&plan.grading).enumerate() {
            let (a, b) = self.segment(k);
            let u = g.boundaries(m.max(1));
            for w in u.windows(2) {
                if w[1] > w[0] {
                    cells.push([a + (b - a) * w[0], a + (b - a) * w[1]]);
                }
            }
        }
        let n = cells.len();
        DiscreteMeasure::from_cells(cells, vec![0.0; n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradings_cover_the_unit_interval() {
        for g in [
            SegmentGrading::Uniform,
            SegmentGrading::ClusterStart(2.0),
            SegmentGrading::ClusterEnd(2.0),
            SegmentGrading::Refined {
                centers: vec![0.3],
                scale: 0.01,
            },
        ] {
            let u = g.boundaries(17);
            assert_eq!(u.len(), 18);
            assert_eq!(u[0], 0.0);
            assert!((u[17] - 1.0).abs() < 1e-15);
            assert!(u.windows(2).all(|w| w[1] > w[0]), "{g:?}");
        }
        let end = SegmentGrading::ClusterEnd(2.0).boundaries(10);
        assert!(end[10] - end[9] < end[1] - end[0]);
    }

    #[test]
    fn mesh_of_test_arc_has_planned_size() {
        let c = Contour::test_arc(1.0, 21, 1e-3);
        let plan = MeshPlan::proportional(&c, 400);
        assert_eq!(plan.total(), 400);
        let mu = c.mesh(&plan).unwrap();
        assert_eq!(mu.len(), 400);
        let total: f64 = mu.cell_lengths.iter().sum();
        assert!((total - c.arc_length()).abs() < 1e-12);
    }
}
