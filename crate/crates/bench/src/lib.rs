//! Shared fixtures for the benchmarks.

use descent_lab::{Contour, FieldSpec, SearchOptions};

/// The NLS field at `(x, 0)` with unit spike height.
pub fn nls(x: f64) -> FieldSpec {
    FieldSpec::nls(x, 0.0, 1.0).expect("valid field parameters")
}

pub fn test_arc(vertices: usize) -> Contour {
    Contour::test_arc(1.0, vertices, 1e-3)
}

/// A search small enough to benchmark: two Fourier modes, no vertex moves.
pub fn small_search(nodes: usize) -> SearchOptions {
    let mut o = SearchOptions {
        fourier_modes: 2,
        vertex_moves: false,
        ..SearchOptions::default()
    };
    o.solver.nodes = nodes;
    o
}
