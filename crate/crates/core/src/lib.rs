//! Numerical laboratory for the nonlinear steepest-descent method applied to
//! the semiclassical focusing NLS equation.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: slit upper half-plane geometry, the half-plane Green's
//!   function, the NLS external field and discrete energies.
//! * [`equilibrium`]: equilibrium measures on a fixed contour, KKT residuals,
//!   band/gap classification and the g-function.
//! * [`scurve`]: the maximin contour search, S-property and quadratic
//!   differential residuals, Hausdorff distance and caustic maps.
//! * [`soliton`]: the exact reflectionless N-soliton oracle.
//! * [`saddle`]: saddle points, steepest-descent paths and the Airy integral.
//! * [`wkb`]: WKB phase integrals for small-dispersion KdV.

pub mod equilibrium;
pub mod error;
pub mod potential;
pub mod quad;
pub mod saddle;
pub mod scurve;
pub mod soliton;
pub mod wkb;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use num_complex::Complex64;

pub use equilibrium::{
    classify_bands, g_function, kkt_residual, solve_equilibrium, BandReport, EquilibriumSolution,
    Genus, SolverOptions,
};
pub use potential::{
    energy, external_field, green, green_potential, weighted_energy, Contour, DiscreteMeasure,
    FieldSpec, MeasureKind, Side, SlitPoint,
};
pub use saddle::{airy_deformed, saddle_points, trace_steepest_path, PolynomialPhase};
pub use scurve::{
    caustic_map, hausdorff_distance, maximin_search, r_function, s_property_residual, CausticMap,
    GeneratorMode, SCurveResult, SearchOptions,
};
pub use soliton::{build_ensemble, evaluate_psi, mass, PsiValue, SolitonEnsemble};
pub use wkb::{rho, tau, turning_points, BumpProfile};
