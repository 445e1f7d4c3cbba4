use thiserror::Error;

use crate::equilibrium::EquilibriumSolution;
use crate::potential::Contour;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular kernel evaluation: coincident points at ({re}, {im})")]
    SingularKernel { re: f64, im: f64 },

    #[error("infinite self-energy: point-mass measure has a repeated node at index {index}")]
    InfiniteSelfEnergy { index: usize },

    #[error("no classical region: z = {z} exceeds the bump height")]
    NoClassicalRegion { z: f64 },

    #[error("equilibrium solver did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        best: Box<EquilibriumSolution>,
    },

    #[error("evaluation point lies on the support of the measure")]
    OnSupport,

    #[error("evaluation at the pole z = 0")]
    Pole,

    #[error("band under-resolved: {nodes} interior probe nodes")]
    BandUnderResolved { nodes: usize },

    #[error("infeasible contour: {0}")]
    InfeasibleContour(String),

    #[error("inner solver failed on a candidate contour: {source}")]
    InnerSolver {
        candidate: Box<Contour>,
        #[source]
        source: Box<Error>,
    },

    #[error("ill-conditioned system: condition estimate {condition:.3e} ({detail})")]
    IllConditioned { condition: f64, detail: String },

    #[error("direction is not a descent direction at the saddle")]
    AscendingDirection,

    #[error("path tracing failed: {0}")]
    PathTracing(String),

    #[error("empty point set")]
    EmptySet,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
