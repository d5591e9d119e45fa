mod common;

use common::suites;
use cpcalc_core::cpm_solver::CpChoice;

#[test]
fn levelset_cp_matches_fixed_step_rk4() {
    let d = suites::cp_deviation(CpChoice::LevelsetCylFirst, 200);
    assert!(d < 1e-8, "{d:e}");
}

#[test]
fn levelset_cp_hat_matches_fixed_step_rk4() {
    let d = suites::cp_deviation(CpChoice::LevelsetParFirst, 200);
    assert!(d < 1e-8, "{d:e}");
}

#[test]
fn oracle_flows_land_on_the_curve() {
    for x in common::tube_points(50, 0.12, 3) {
        for y in [common::rk4_cp(x, 2000), common::rk4_cp_hat(x, 2000)] {
            assert!(common::cyl(y).abs() < 1e-10 && common::par(y).abs() < 1e-10);
        }
    }
}

#[test]
fn oracle_heat_solver_conserves_the_weighted_mean() {
    let n = 400;
    let u = common::heat_fd(n, 0.05, |x| (4.0 * x[2]).exp() / 50.0);
    let u0: Vec<f64> = (0..n)
        .map(|k| (4.0 * common::gamma(std::f64::consts::TAU * k as f64 / n as f64)[2]).exp() / 50.0)
        .collect();
    let w: Vec<f64> = (0..n)
        .map(|k| common::speed(std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    let mass = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    assert!((mass(&u) - mass(&u0)).abs() < 1e-10 * mass(&u0), "{} {}", mass(&u), mass(&u0));
}

#[test]
fn arc_length_matches_dense_simpson() {
    let d = suites::arc_length_deviation();
    assert!(d < 1e-12, "{d:e}");
}

#[test]
fn advection_reference_matches_characteristics() {
    let d = suites::advection_deviation();
    assert!(d < 1e-10, "{d:e}");
}

#[test]
fn heat_reference_matches_finite_differences() {
    let d = suites::heat_deviation();
    assert!(d < 1e-6, "{d:e}");
}

#[test]
fn interpolants_reproduce_their_polynomial_spaces() {
    for (kind, d) in suites::interpolation_exactness() {
        assert!(d < 1e-12, "{kind:?} {d:e}");
    }
}

#[test]
fn oracle_heat_solver_is_second_order() {
    let u0 = |x: common::V3| (4.0 * x[2]).exp() / 50.0;
    let a = common::heat_fd(200, 0.1, u0);
    let b = common::heat_fd(400, 0.1, u0);
    let c = common::heat_fd(800, 0.1, u0);
    let d1 = (0..200).map(|k| (a[k] - b[2 * k]).abs()).fold(0.0, f64::max);
    let d2 = (0..200).map(|k| (b[2 * k] - c[4 * k]).abs()).fold(0.0, f64::max);
    assert!((3.6..4.4).contains(&(d1 / d2)), "{d1:e} {d2:e}");
}
