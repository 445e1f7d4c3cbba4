use descent_lab::equilibrium::{g_function_symmetric, InitialGuess};
use descent_lab::potential::kernel_matrix;
use descent_lab::potential::{MeshPlan, SyntheticField};
use descent_lab::{
    classify_bands, energy, g_function, green, green_potential, kkt_residual, solve_equilibrium,
    weighted_energy, Complex64, Contour, DiscreteMeasure, Error, FieldSpec, Genus, SlitPoint,
    SolverOptions,
};
use proptest::prelude::*;

fn upper_point() -> impl Strategy<Value = (f64, f64)> {
    (-3.0..3.0f64, 0.01..3.0f64)
}

proptest! {
    #[test]
    fn green_is_symmetric_and_positive((a, b) in upper_point(), (c, d) in upper_point()) {
        prop_assume!((a - c).abs() + (b - d).abs() > 1e-6);
        let z = SlitPoint::new(a, b);
        let w = SlitPoint::new(c, d);
        let g1 = green(&z, &w).unwrap();
        let g2 = green(&w, &z).unwrap();
        prop_assert!(g1 > 0.0);
        prop_assert!((g1 - g2).abs() <= 1e-14 * g1.max(1.0));
    }

    #[test]
    fn green_vanishes_on_the_real_axis(x in -5.0..5.0f64, (c, d) in upper_point()) {
        let g = green(&SlitPoint::new(x, 0.0), &SlitPoint::new(c, d)).unwrap();
        prop_assert!(g.abs() < 1e-14);
    }

    #[test]
    fn kernel_is_positive_semidefinite(
        pts in prop::collection::vec(upper_point(), 3..8),
        n in 4usize..10,
    ) {
        // a polyline through random points, meshed into density cells
        let mut z: Vec<Complex64> = pts.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
        z.dedup_by(|a, b| (*a - *b).norm() < 1e-3);
        prop_assume!(z.len() >= 2);
        let cells: Vec<[Complex64; 2]> = z
            .windows(2)
            .flat_map(|w| {
                (0..n).map(move |k| {
                    let s0 = k as f64 / n as f64;
                    let s1 = (k + 1) as f64 / n as f64;
                    [w[0] + (w[1] - w[0]) * s0, w[0] + (w[1] - w[0]) * s1]
                })
            })
            .collect();
        let m = cells.len();
        let mu = DiscreteMeasure::from_cells(cells, vec![1.0; m]).unwrap();
        let k = kernel_matrix(&mu).unwrap();
        let scale = k.amax();
        let eig = k.symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-9 * scale, "min eigenvalue {}", eig.min());
    }

    #[test]
    fn energy_scales_quadratically(rho in 0.1..5.0f64) {
        let base = DiscreteMeasure::uniform_segment(Complex64::new(0.3, 0.2), Complex64::new(-0.4, 1.1), 40, 1.0).unwrap();
        let scaled = DiscreteMeasure::uniform_segment(Complex64::new(0.3, 0.2), Complex64::new(-0.4, 1.1), 40, rho).unwrap();
        let e1 = energy(&base).unwrap();
        let e2 = energy(&scaled).unwrap();
        prop_assert!((e2 - rho * rho * e1).abs() <= 1e-12 * e2.abs().max(1.0));
    }
}

/// Exact energy of the uniform unit density on `[0, i]`.
fn spike_energy_exact() -> f64 {
    // ∫∫ log((s+u)/|s-u|) ds du over the unit square
    2.0 * 2f64.ln()
}

#[test]
fn uniform_spike_energy_refines_at_second_order() {
    let errs: Vec<f64> = [100, 200, 400, 800]
        .iter()
        .map(|&n| {
            let mu = DiscreteMeasure::uniform_segment(
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
                n,
                1.0,
            )
            .unwrap();
            (energy(&mu).unwrap() - spike_energy_exact()).abs()
        })
        .collect();
    assert!(errs[3] < 1e-4, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 3.0, "{errs:?}");
    }
}

#[test]
fn spike_potential_matches_closed_form() {
    // V(iy) for y > 1: ∫₀¹ log((y+s)/(y-s)) ds
    let closed =
        |y: f64| (y + 1.0) * (y + 1.0).ln() + (y - 1.0) * (y - 1.0).ln() - 2.0 * y * y.ln();
    let mu = DiscreteMeasure::uniform_segment(
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 1.0),
        200,
        1.0,
    )
    .unwrap();
    for y in [1.5, 2.0, 4.0, 10.0] {
        let v = green_potential(&SlitPoint::new(0.0, y), &mu).unwrap();
        assert!(
            (v - closed(y)).abs() < 1e-9,
            "y = {y}: {v} vs {}",
            closed(y)
        );
    }
}

#[test]
fn nls_field_is_linear_on_the_real_axis() {
    let f = FieldSpec::nls(0.37, 0.11, 1.0).unwrap();
    for x in [-2.0, -0.5, 0.25, 1.0, 3.0] {
        let v = f.value(Complex64::new(x, 0.0));
        assert!((v - std::f64::consts::PI * x).abs() < 1e-10, "{x}: {v}");
    }
}

fn arc() -> Contour {
    Contour::test_arc(1.0, 17, 1e-3)
}

#[test]
fn recomputed_energy_matches_the_reported_value() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let sol = solve_equilibrium(
        &arc(),
        &f,
        &SolverOptions {
            nodes: 200,
            ..Default::default()
        },
    )
    .unwrap();
    let e = weighted_energy(&sol.measure, &f).unwrap();
    assert!((e - sol.energy_value).abs() <= 1e-12 * e.abs().max(1.0));
    assert!(sol.measure.weights.iter().all(|w| *w >= 0.0));
    assert!(sol.clamp_magnitude <= 1e-14);
}

#[test]
fn kkt_residuals_on_the_nls_arc() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let sol = solve_equilibrium(&arc(), &f, &SolverOptions::default()).unwrap();
    let (on, off) = kkt_residual(&sol, &f).unwrap();
    assert!(on <= 1e-3 && off >= -1e-3, "{on} {off}");
    assert_eq!(sol.genus(), Genus::Genus(0));
}

#[test]
fn random_starts_agree_in_energy_and_measure() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let base = SolverOptions {
        nodes: 200,
        ..Default::default()
    };
    let runs: Vec<_> = [11u64, 29]
        .iter()
        .map(|&s| {
            solve_equilibrium(
                &arc(),
                &f,
                &SolverOptions {
                    initial: InitialGuess::Random(s),
                    ..base.clone()
                },
            )
            .unwrap()
        })
        .collect();
    assert!((runs[0].energy_value - runs[1].energy_value).abs() <= 2.0 * base.energy_tol);
    let l1: f64 = runs[0]
        .measure
        .weights
        .iter()
        .zip(&runs[1].measure.weights)
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(l1 <= 1e-3 * runs[0].measure.total_mass(), "{l1}");
}

#[test]
fn mesh_refinement_is_stable() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let e: Vec<f64> = [200, 400]
        .iter()
        .map(|&n| {
            solve_equilibrium(
                &arc(),
                &f,
                &SolverOptions {
                    nodes: n,
                    ..Default::default()
                },
            )
            .unwrap()
            .energy_value
        })
        .collect();
    assert!((e[1] - e[0]).abs() <= 0.01 * e[1].abs(), "{e:?}");
}

#[test]
fn optimizer_history_never_increases() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let opts = SolverOptions {
        nodes: 200,
        record_history: true,
        initial: InitialGuess::Random(3),
        ..Default::default()
    };
    let sol = solve_equilibrium(&arc(), &f, &opts).unwrap();
    assert!(sol.history.len() > 2);
    for w in sol.history.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0),
            "{} -> {}",
            w[0],
            w[1]
        );
    }
}

#[test]
fn fewer_than_eight_nodes_is_rejected() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let short = Contour::test_arc(1.0, 3, 1e-3);
    let opts = SolverOptions {
        plan: Some(MeshPlan::uniform(&short, 4)),
        ..Default::default()
    };
    assert!(matches!(
        solve_equilibrium(&short, &f, &opts),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn zero_measure_reports_empty_genus() {
    let f = FieldSpec::Synthetic(SyntheticField::constant(1.0, 0.5));
    let sol = solve_equilibrium(
        &arc(),
        &f,
        &SolverOptions {
            nodes: 80,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(sol.measure.total_mass(), 0.0);
    let report = classify_bands(&sol, 1e-8);
    assert!(report.bands.is_empty());
    assert_eq!(report.genus, Genus::Empty);
    let (on, off) = kkt_residual(&sol, &f).unwrap();
    assert_eq!(on, 0.0);
    assert!((off - 0.5).abs() < 1e-12);
}

#[test]
fn g_function_expansion_and_reflection() {
    let f = FieldSpec::nls(0.2, 0.0, 1.0).unwrap();
    let sol = solve_equilibrium(
        &arc(),
        &f,
        &SolverOptions {
            nodes: 120,
            ..Default::default()
        },
    )
    .unwrap();
    let m = sol.measure.total_mass();
    let far = Complex64::new(6e5, 8e5);
    let g = g_function(&SlitPoint::from_complex(far), &sol).unwrap();
    let lead = m * far.ln();
    assert!((g - lead).norm() <= 1e-5 * lead.norm(), "{g} vs {lead}");
    // direct summation of the reflected measure
    for z in [Complex64::new(0.7, 0.4), Complex64::new(-1.2, 2.0)] {
        let direct: Complex64 = sol
            .measure
            .nodes
            .iter()
            .zip(&sol.measure.weights)
            .map(|(p, w)| *w * ((z - p.z()).ln() - (z - p.z().conj()).ln()))
            .sum();
        let gs = g_function_symmetric(&SlitPoint::from_complex(z), &sol).unwrap();
        assert!(
            (gs.re - direct.re).abs() < 2e-3 * direct.re.abs().max(1e-3),
            "{gs} vs {direct}"
        );
        let mirrored = g_function_symmetric(&SlitPoint::from_complex(z.conj()), &sol);
        if let Ok(gm) = mirrored {
            assert!((gm.re + gs.re).abs() < 1e-10);
        }
    }
}
