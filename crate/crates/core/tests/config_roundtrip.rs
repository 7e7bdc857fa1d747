use std::path::PathBuf;

use garding_eigen::config::{parse_config, RunConfig};
use garding_eigen::grid::DomainSpec;
use garding_eigen::operators::HessianOperator;
use proptest::prelude::*;

fn operator() -> impl Strategy<Value = HessianOperator> {
    prop_oneof![
        Just(HessianOperator::k_hessian(1, 2).unwrap()),
        Just(HessianOperator::k_hessian(2, 2).unwrap()),
        Just(HessianOperator::p_monge_ampere(1, 2).unwrap()),
        Just(HessianOperator::p_monge_ampere(2, 2).unwrap()),
    ]
}

fn domain() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.01f64..100.0, 0.01f64..100.0).prop_map(|(width, height)| DomainSpec::Rectangle { width, height }),
        (0.01f64..100.0).prop_map(|radius| DomainSpec::Disk { radius }),
    ]
}

proptest! {
    #[test]
    fn text_form_round_trips(
        op in operator(),
        dom in domain(),
        h in 1e-6f64..1.0,
        seed in any::<u64>(),
        tol in 1e-14f64..1e-2,
        max_iterations in 1usize..500,
        shrink in 0.01f64..0.99,
        cone_margin in 0.0f64..1e-3,
        tol_eig in 1e-14f64..1e-3,
        blowup_cap in 11.0f64..1e8,
        output in "[a-z][a-z0-9_/]{0,20}",
    ) {
        let mut cfg = RunConfig::new(op, dom);
        cfg.h = h;
        cfg.seed = seed;
        cfg.solver.tol = tol;
        cfg.solver.max_iterations = max_iterations;
        cfg.solver.shrink = shrink;
        cfg.solver.cone_margin = cone_margin;
        cfg.eigen.tol_eig = tol_eig;
        cfg.eigen.blowup_cap = blowup_cap;
        cfg.output = PathBuf::from(output);
        let text = cfg.to_text();
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
