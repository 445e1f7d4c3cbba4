use descent_lab::equilibrium::{solve_equilibrium, solve_on_measure, SolverOptions};
use descent_lab::potential::{Contour, FieldSpec, MeshPlan, SlitPoint, SyntheticField};
use descent_lab::scurve::{
    hausdorff_distance, maximin_search, r_function, s_property_residual, GeneratorMode,
    ResidualOptions, SearchOptions,
};
use descent_lab::{Complex64, Error};
use proptest::prelude::*;

fn coarse() -> SearchOptions {
    let mut o = SearchOptions::default();
    o.solver.nodes = 160;
    o
}

fn arc() -> Contour {
    Contour::test_arc(1.0, 11, 1e-3)
}

fn slit_point() -> impl Strategy<Value = SlitPoint> {
    prop_oneof![
        (-2.0..2.0f64, 0.0..3.0f64).prop_map(|(x, y)| SlitPoint::new(x, y)),
        (0.0..1.0f64, any::<bool>()).prop_map(|(y, left)| SlitPoint::on_spike(
            y,
            if left {
                descent_lab::Side::Left
            } else {
                descent_lab::Side::Right
            }
        )),
    ]
    .prop_filter("off-spike points must not sit on the slit", |p| {
        p.re != 0.0 || p.im > 1.0 || p.side != descent_lab::Side::OffSpike
    })
}

fn point_set() -> impl Strategy<Value = Vec<SlitPoint>> {
    prop::collection::vec(slit_point(), 1..8)
}

proptest! {
    #[test]
    fn hausdorff_is_a_metric(e in point_set(), f in point_set(), g in point_set()) {
        let d = |p: &[SlitPoint], q: &[SlitPoint]| hausdorff_distance(p, q, 1.0).unwrap();
        prop_assert_eq!(d(&e, &e), 0.0);
        prop_assert_eq!(d(&e, &f), d(&f, &e));
        prop_assert!(d(&e, &g) <= d(&e, &f) + d(&f, &g) + 1e-12);
    }
}

#[test]
fn hausdorff_triangle_on_sampled_contours() {
    let contours: Vec<Vec<SlitPoint>> = (0..6)
        .map(|k| {
            let w = 0.4 + 0.15 * k as f64;
            let h = 1.1 + 0.2 * k as f64;
            Contour::arc(1.0, 9, 1e-3, w, h).sample(0.1)
        })
        .collect();
    let mut checked = 0;
    for a in &contours {
        for b in &contours {
            for c in &contours {
                let ab = hausdorff_distance(a, b, 1.0).unwrap();
                let bc = hausdorff_distance(b, c, 1.0).unwrap();
                let ac = hausdorff_distance(a, c, 1.0).unwrap();
                assert!(ac <= ab + bc + 1e-12);
                checked += 1;
            }
        }
    }
    assert!(checked >= 100);
}

#[test]
fn positive_field_leaves_the_contour_alone() {
    let field = FieldSpec::Synthetic(SyntheticField::new(1.0, |z: Complex64| 1.0 + z.norm_sqr()));
    let start = arc();
    let res = maximin_search(&start, &field, &coarse()).unwrap();
    assert_eq!(res.contour, start);
    assert_eq!(res.energy, 0.0);
    assert!(res.local_max_certificate <= 0.0);
    assert_eq!(res.s_residual, 0.0);
}

#[test]
fn infeasible_start_is_rejected() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let bad = Contour::from_points(&[
        Complex64::new(1e-3, 0.0),
        Complex64::new(0.5, 0.5),
        Complex64::new(-0.5, 0.5),
        Complex64::new(-1e-3, 0.0),
    ])
    .unwrap();
    assert!(matches!(
        maximin_search(&bad, &field, &coarse()),
        Err(Error::InfeasibleContour(_))
    ));
}

#[test]
fn inner_failure_carries_the_candidate() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let mut o = coarse();
    o.solver.max_iter = 0;
    o.solver.projected_gradient_steps = 1;
    match maximin_search(&arc(), &field, &o) {
        Err(Error::InnerSolver { candidate, source }) => {
            assert_eq!(candidate.vertices.len(), 11);
            assert!(matches!(*source, Error::NonConvergence { .. }));
        }
        other => panic!("expected an inner solver error, got {other:?}"),
    }
}

fn even_well() -> FieldSpec {
    let c = Complex64::new(0.0, 2.0);
    FieldSpec::Synthetic(
        SyntheticField::new(1.0, move |z: Complex64| 4.0 * (z - c).norm_sqr() - 0.2)
            .with_derivative(move |z: Complex64| (z - c).conj() * 8.0),
    )
}

/// Runs right of the spike up to `1.5i`, along the imaginary axis to `2.5i`,
/// then back down on the left.
fn axis_contour() -> Contour {
    Contour::from_points(&[
        Complex64::new(1e-3, 0.0),
        Complex64::new(0.8, 0.8),
        Complex64::new(0.0, 1.5),
        Complex64::new(0.0, 2.5),
        Complex64::new(-0.8, 0.8),
        Complex64::new(-1e-3, 0.0),
    ])
    .unwrap()
}

#[test]
fn reflection_symmetry_gives_zero_s_residual() {
    let field = even_well();
    let c = axis_contour();
    let sol = solve_equilibrium(&c, &field, &SolverOptions::default()).unwrap();
    assert!(sol.measure.total_mass() > 0.0);
    for &(b0, b1) in &sol.bands {
        for i in b0..=b1 {
            assert_eq!(
                sol.measure.nodes[i].re, 0.0,
                "support left the axis at node {i}"
            );
        }
    }
    let r = s_property_residual(&sol, &field, &ResidualOptions::for_height(1.0)).unwrap();
    assert!(r < 1e-6, "residual {r}");
}

#[test]
fn tiny_band_is_under_resolved() {
    let field = even_well();
    let sol = solve_equilibrium(
        &axis_contour(),
        &field,
        &SolverOptions {
            nodes: 60,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    let opts = ResidualOptions {
        min_probes: 1000,
        ..ResidualOptions::for_height(1.0)
    };
    assert!(matches!(
        s_property_residual(&sol, &field, &opts),
        Err(Error::BandUnderResolved { .. })
    ));
}

#[test]
fn rotating_the_band_raises_the_s_residual() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let o = coarse();
    let res = maximin_search(&arc(), &field, &o).unwrap();
    let sol = &res.solution;
    let (b0, b1) = sol.bands[0];
    let band_top = sol.measure.cells[b0][0];
    let band_end = sol.measure.cells[b1][1];
    // rotate the vertices on the band by 5° about the end farther from them
    let pivot = if band_end.norm() < band_top.norm() {
        band_end
    } else {
        band_top
    };
    let rot = Complex64::from_polar(1.0, 5f64.to_radians());
    let lo = band_top.im.min(band_end.im);
    let hi = band_top.im.max(band_end.im);
    let pts: Vec<Complex64> = res
        .contour
        .points()
        .into_iter()
        .enumerate()
        .map(|(k, z)| {
            let interior = k > 0 && k + 1 < res.contour.vertices.len();
            if interior && z.im >= lo && z.im <= hi && z.re < 0.05 {
                pivot + (z - pivot) * rot
            } else {
                z
            }
        })
        .collect();
    let rotated = Contour::from_points(&pts).unwrap();
    rotated.check_feasible(1.0, o.delta).unwrap();
    let template = rotated
        .mesh(&MeshPlan::proportional(&arc(), o.solver.nodes))
        .unwrap();
    let perturbed = solve_on_measure(&rotated, &template, &field, &o.solver).unwrap();
    let ropts = ResidualOptions::for_height(1.0);
    let before = s_property_residual(sol, &field, &ropts).unwrap();
    let after = s_property_residual(&perturbed, &field, &ropts).unwrap();
    assert!(after > before, "rotated {after} vs converged {before}");
}

#[test]
fn r_without_measure_is_the_square_of_the_generator() {
    let field = FieldSpec::nls(0.3, 0.1, 1.0).unwrap();
    // a field positive on the contour gives the zero measure
    let flat = FieldSpec::Synthetic(SyntheticField::constant(1.0, 1.0));
    let sol = solve_equilibrium(&arc(), &flat, &SolverOptions::default()).unwrap();
    assert_eq!(sol.measure.total_mass(), 0.0);
    for z in [
        Complex64::new(0.3, 0.4),
        Complex64::new(-1.0, 2.0),
        Complex64::new(0.2, -0.7),
    ] {
        let r = r_function(z, &sol, &field, GeneratorMode::FieldDerivative).unwrap();
        let v = if z.im >= 0.0 {
            field.derivative(z)
        } else {
            -field.derivative(z.conj()).conj()
        };
        assert!((r - v * v).norm() <= 1e-14 * (1.0 + (v * v).norm()));
        let rb = r_function(z, &sol, &field, GeneratorMode::MeasurePotential).unwrap();
        assert_eq!(rb, Complex64::new(0.0, 0.0));
    }
}

#[test]
fn r_is_schwarz_symmetric() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let sol = solve_equilibrium(
        &arc(),
        &field,
        &SolverOptions {
            nodes: 160,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    assert!(sol.measure.total_mass() > 0.0);
    let mut rng = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..50 {
        let z = Complex64::new(4.0 * next() - 2.0, 3.0 * next() + 0.01);
        for mode in GeneratorMode::ALL {
            let up = r_function(z, &sol, &field, mode).unwrap();
            let down = r_function(z.conj(), &sol, &field, mode).unwrap();
            assert!(
                (down - up.conj()).norm() <= 1e-10 * (1.0 + up.norm()),
                "{mode:?} at {z}: {up} vs {down}"
            );
        }
    }
}

#[test]
fn r_rejects_pole_and_support() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let sol = solve_equilibrium(
        &arc(),
        &field,
        &SolverOptions {
            nodes: 160,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    let zero = Complex64::new(0.0, 0.0);
    assert!(matches!(
        r_function(zero, &sol, &field, GeneratorMode::FieldDerivative),
        Err(Error::Pole)
    ));
    let (b0, _) = sol.bands[0];
    let on = sol.measure.nodes[b0 + 1].z();
    assert!(matches!(
        r_function(on, &sol, &field, GeneratorMode::MeasurePotential),
        Err(Error::OnSupport)
    ));
}

#[test]
fn larger_families_never_lose_energy() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let presets = [(1, false), (3, false), (3, true)];
    let energies: Vec<f64> = presets
        .iter()
        .map(|&(modes, vertices)| {
            let mut o = coarse();
            o.fourier_modes = modes;
            o.vertex_moves = vertices;
            maximin_search(&arc(), &field, &o).unwrap().energy
        })
        .collect();
    for w in energies.windows(2) {
        assert!(w[1] >= w[0], "{energies:?}");
    }
}

#[test]
fn s_residual_trends_down_during_the_search() {
    let field = FieldSpec::nls(0.4, 0.0, 1.0).unwrap();
    let mut o = SearchOptions::default();
    o.record_iterates = true;
    let res = maximin_search(&Contour::test_arc(1.0, 17, 1e-3), &field, &o).unwrap();
    let s: Vec<f64> = res.iterates.iter().map(|it| it.s_residual).collect();
    assert!(s.len() >= 5);
    let rises = s.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(rises as f64 <= 0.1 * (s.len() - 1) as f64, "{s:?}");
    assert!(s.last().unwrap() < s.first().unwrap());
}

#[test]
fn field_reflection_identity() {
    // z -> -z̄ with t -> -t maps the field to itself up to -2π Re z, so x -> -x
    // is not a symmetry of the field
    let (x, t) = (0.4, 0.07);
    let f = FieldSpec::nls(x, t, 1.0).unwrap();
    let g = FieldSpec::nls(x, -t, 1.0).unwrap();
    for z in [
        Complex64::new(0.3, 0.2),
        Complex64::new(1.2, 2.5),
        Complex64::new(0.05, 0.5),
    ] {
        let lhs = g.value(-z.conj());
        let rhs = f.value(z) - 2.0 * std::f64::consts::PI * z.re;
        assert!((lhs - rhs).abs() < 1e-12);
    }
    let m = FieldSpec::nls(-x, t, 1.0).unwrap();
    let z = Complex64::new(0.3, 0.2);
    assert!((m.value(-z.conj()) - f.value(z)).abs() > 0.1);
}

#[test]
#[ignore = "x -> -x is not a symmetry of the field (see field_reflection_identity)"]
fn mirrored_search_matches_energy() {
    let mut o = coarse();
    o.parallel = false;
    let plus = maximin_search(&arc(), &FieldSpec::nls(0.4, 0.0, 1.0).unwrap(), &o).unwrap();
    let minus = maximin_search(&arc(), &FieldSpec::nls(-0.4, 0.0, 1.0).unwrap(), &o).unwrap();
    let reflected = minus.contour.reflected();
    let sol = solve_equilibrium(
        &reflected,
        &FieldSpec::nls(0.4, 0.0, 1.0).unwrap(),
        &o.solver,
    )
    .unwrap();
    assert!(
        (sol.energy_value - plus.energy).abs() <= 2.0 * o.solver.energy_tol,
        "{} vs {}",
        sol.energy_value,
        plus.energy
    );
}
