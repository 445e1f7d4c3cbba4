//! Potential theory in the slit upper half-plane.
//!
//! The domain is the open upper half-plane with the segment `(0, iA]` removed;
//! points on that segment carry a [`Side`] tag so the two banks of the slit
//! stay distinct. Everything downstream (equilibrium measures, the maximin
//! search) is built from the primitives here.

mod field;
mod kernel;
mod measure;
mod slit;

pub use field::{
    external_field, field_derivative, spike_green_integral, FieldSpec, SyntheticField,
};
pub(crate) use kernel::field_vector;
pub use kernel::{
    energy, green, green_complex, green_potential, green_potential_at, kernel_matrix,
    segment_log_potential, self_cell_log_average, weighted_energy, KernelMatrix,
};
pub use measure::{DiscreteMeasure, MeasureKind, MeshPlan, SegmentGrading};
pub(crate) use slit::point_segment_distance;
pub use slit::{slit_distance, spike_distance, Contour, Side, SlitPoint};
