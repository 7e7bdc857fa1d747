//! Comparison principle along the family: `u_λ` decreases pointwise in λ.

use garding_eigen::grid::{DomainSpec, Grid};
use garding_eigen::newton::{solve_family, NewtonOptions};
use garding_eigen::operators::HessianOperator;

fn check(op: &str, domain: DomainSpec, lambdas: &[f64]) {
    let op: HessianOperator = op.parse().unwrap();
    let grid = Grid::build(domain, 1.0 / 32.0).unwrap();
    let opts = NewtonOptions::default();
    let mut prev: Option<garding_eigen::GridField> = None;
    for &l in lambdas {
        let (u, _) = solve_family(&op, &grid, l, prev.as_ref(), &opts).unwrap();
        assert!(u.max_value() <= 0.0);
        if let Some(p) = &prev {
            let worst =
                grid.interior_nodes().iter().map(|&n| u.value(n) - p.value(n)).fold(f64::NEG_INFINITY, f64::max);
            assert!(worst <= 10.0 * opts.tol, "{op} lambda {l}: u rose by {worst:e}");
            assert!(u.sup_norm() >= p.sup_norm());
        }
        prev = Some(u);
    }
}

#[test]
fn monge_ampere_disk_family_is_ordered() {
    check("k-hessian:k=2,n=2", DomainSpec::unit_disk(), &[0.0, 1.0, 2.0, 2.5, 2.7]);
}

#[test]
fn monge_ampere_square_family_is_ordered() {
    check("p-ma:p=1,n=2", DomainSpec::unit_square(), &[0.0, 3.0, 6.0, 7.0]);
}

#[test]
fn laplacian_rectangle_family_is_ordered() {
    check("k-hessian:k=1,n=2", DomainSpec::Rectangle { width: 2.0, height: 1.0 }, &[0.0, 2.0, 4.0, 6.0]);
}
