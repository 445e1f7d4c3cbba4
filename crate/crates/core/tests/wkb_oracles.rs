mod common;

use descent_lab::wkb::{rho, rho_with_tol, tau, turning_points, BumpProfile};
use proptest::prelude::*;

fn sech2(x: f64) -> f64 {
    1.0 / x.cosh().powi(2)
}

#[test]
fn tau_half_against_tanh_sinh() {
    let u = BumpProfile::sech2();
    let xp = (2.0 + 3f64.sqrt()).ln();
    let oracle = common::tanh_sinh(|x| (sech2(x) - 0.25).max(0.0).sqrt(), -xp, xp, 8);
    assert!((tau(0.5, &u).unwrap() - oracle).abs() <= 1e-7, "{oracle}");
}

#[test]
fn rho_half_against_tanh_sinh() {
    let u = BumpProfile::sech2();
    let z: f64 = 0.5;
    let xp = (2.0 + 3f64.sqrt()).ln();
    let cut = 40.0;
    let body = common::tanh_sinh(|x| z - (z * z - sech2(x)).max(0.0).sqrt(), xp, cut, 9);
    let tail = (1.0 - cut.tanh()) / (2.0 * z);
    let oracle = xp * z + body + tail;
    assert!((rho(0.5, &u).unwrap() - oracle).abs() <= 1e-7, "{oracle}");
}

#[test]
fn rho_refinements_form_a_cauchy_sequence() {
    let u = BumpProfile::sech2();
    let vals: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10, 1e-12]
        .iter()
        .map(|&t| rho_with_tol(0.9, &u, t).unwrap().value)
        .collect();
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.iter().all(|&d| d <= 1e-4));
    assert!(diffs.last().unwrap() <= &1e-10);
}

#[test]
fn tau_decreases_on_a_grid() {
    let u = BumpProfile::sech2();
    let taus: Vec<f64> = (1..=50)
        .map(|k| tau(k as f64 / 50.0, &u).unwrap())
        .collect();
    assert!(taus.windows(2).all(|w| w[1] < w[0]));
}

proptest! {
    #[test]
    fn turning_points_bracket_the_classical_region(z in 0.01f64..1.0) {
        let u = BumpProfile::sech2();
        let (xm, xp) = turning_points(z, &u).unwrap();
        prop_assert!(xm <= xp);
        prop_assert!((sech2(xp) - z * z).abs() <= 1e-11);
        prop_assert!((xm + xp).abs() <= 1e-11);
    }

    #[test]
    fn rho_is_continuous(z in 0.05f64..0.99) {
        let u = BumpProfile::sech2();
        let a = rho(z, &u).unwrap();
        let b = rho(z + 1e-7, &u).unwrap();
        prop_assert!((a - b).abs() < 1e-5);
    }
}
