use garding_eigen::eigen::{
    compute_eigenpair, estimate_lambda1, inverse_power_refine, run_continuation, verify_bounds, verify_uniqueness,
    EigenOptions, EigenResult, Schedule,
};
use garding_eigen::grid::{DomainSpec, Grid};
use garding_eigen::newton::NewtonOptions;
use garding_eigen::operators::HessianOperator;
use garding_eigen::radial::{oracle_lambda1, RadialProblem, BESSEL_J01};
use garding_eigen::Error;

fn ma() -> HessianOperator {
    HessianOperator::k_hessian(2, 2).unwrap()
}

#[test]
fn eigenfunction_sign_normalization_and_residual() {
    let h = 1.0 / 32.0;
    let grid = Grid::build(DomainSpec::unit_disk(), h).unwrap();
    let opts = NewtonOptions::default();
    let run = compute_eigenpair(&ma(), &grid, &opts, &EigenOptions::default()).unwrap();
    let u = &run.result.eigenfunction;
    assert!((u.sup_norm() - 1.0).abs() <= 1e-12);
    assert!(u.max_value() <= 0.0);
    for &node in grid.interior_nodes() {
        let p = grid.position(node);
        if grid.domain().distance_to_boundary(p) > 3.0 * h {
            assert!(u.value(node) < 0.0);
        }
    }
    assert!(run.result.residual <= 100.0 * opts.tol, "{}", run.result.residual);
    let b = run.result.bracket.unwrap();
    assert!(b.lower <= run.result.lambda1 && run.result.lambda1 <= b.upper * 1.02);
}

#[test]
fn refinement_is_scale_invariant() {
    let grid = Grid::build(DomainSpec::unit_disk(), 1.0 / 24.0).unwrap();
    let opts = NewtonOptions::default();
    let eig = EigenOptions::default();
    let cont = run_continuation(&ma(), &grid, &Schedule::Adaptive { initial_step: None }, &opts, &eig).unwrap();
    let est = estimate_lambda1(&cont.trace).unwrap();
    let a = inverse_power_refine(&ma(), &grid, &cont.last, est, &opts, &eig).unwrap();
    let b = inverse_power_refine(&ma(), &grid, &cont.last.scaled(7.5), est, &opts, &eig).unwrap();
    assert!((a.lambda1 - b.lambda1).abs() <= 10.0 * eig.tol_eig * a.lambda1);
    assert!(a.eigenfunction.sup_distance(&b.eigenfunction) <= 10.0 * eig.tol_eig);
}

#[test]
fn extrapolated_estimate_is_close_to_oracle() {
    let grid = Grid::build(DomainSpec::unit_disk(), 1.0 / 32.0).unwrap();
    let cont = run_continuation(
        &ma(),
        &grid,
        &Schedule::Adaptive { initial_step: None },
        &NewtonOptions::default(),
        &EigenOptions::default(),
    )
    .unwrap();
    assert!(cont.trace.monotone);
    let est = estimate_lambda1(&cont.trace).unwrap();
    let oracle = oracle_lambda1(&RadialProblem::new(ma(), 1.0, 10_000).unwrap()).unwrap();
    assert!((est - oracle).abs() <= 0.05 * oracle, "{est} vs {oracle}");
}

#[test]
fn laplacian_on_disk_matches_bessel_zero() {
    let grid = Grid::build(DomainSpec::unit_disk(), 1.0 / 64.0).unwrap();
    let op = HessianOperator::k_hessian(1, 2).unwrap();
    let run = compute_eigenpair(&op, &grid, &NewtonOptions::default(), &EigenOptions::default()).unwrap();
    let exact = BESSEL_J01 * BESSEL_J01 / 2.0;
    assert!((run.result.lambda1 - exact).abs() <= 0.015 * exact, "{}", run.result.lambda1);
}

#[test]
fn fabricated_eigenvalue_above_bracket_fails() {
    let grid = Grid::build(DomainSpec::unit_square(), 1.0 / 16.0).unwrap();
    let op = HessianOperator::k_hessian(1, 2).unwrap();
    let run = compute_eigenpair(&op, &grid, &NewtonOptions::default(), &EigenOptions::default()).unwrap();
    assert!(verify_bounds(&op, &grid, &run.result, &run.u0).unwrap().pass);
    let fake = EigenResult { lambda1: run.result.lambda1 * 1.05, ..run.result.clone() };
    assert!(!verify_bounds(&op, &grid, &fake, &run.u0).unwrap().pass);
}

#[test]
fn uniqueness_needs_two_trials() {
    let grid = Grid::build(DomainSpec::unit_square(), 1.0 / 16.0).unwrap();
    let op = HessianOperator::k_hessian(1, 2).unwrap();
    let (opts, eig) = (NewtonOptions::default(), EigenOptions::default());
    let run = compute_eigenpair(&op, &grid, &opts, &eig).unwrap();
    assert!(matches!(verify_uniqueness(&op, &grid, &run.result, 1, 0, &opts, &eig), Err(Error::Contract(_))));
    assert!(verify_uniqueness(&op, &grid, &run.result, 2, 0, &opts, &eig).unwrap().pass);
}

#[test]
fn fixed_schedule_must_start_at_zero() {
    let grid = Grid::build(DomainSpec::unit_square(), 1.0 / 16.0).unwrap();
    let op = HessianOperator::k_hessian(1, 2).unwrap();
    let r = run_continuation(
        &op,
        &grid,
        &Schedule::Fixed(vec![1.0, 2.0]),
        &NewtonOptions::default(),
        &EigenOptions::default(),
    );
    assert!(matches!(r, Err(Error::Contract(_))));
    let ok = run_continuation(
        &op,
        &grid,
        &Schedule::Fixed(vec![0.0, 4.0, 8.0, 9.0]),
        &NewtonOptions::default(),
        &EigenOptions::default(),
    )
    .unwrap();
    assert_eq!(ok.trace.records.len(), 4);
    assert!(ok.trace.monotone);
}
