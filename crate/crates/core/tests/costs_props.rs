mod common;

use common::{density, pure, separable, unitary};
use erasure_core::costs::{
    assisted_cost, conditional_vn_entropy_cq, exclusivity_dd, koashi_winter_check, unassisted_cost,
    OptimizerConfig,
};
use erasure_core::measurements::{complementarity, conditional_ensemble_on};
use erasure_core::numerics::{kron, CMatrix};
use erasure_core::states::{partial_trace, werner_state};
use erasure_core::ProjectiveBasis;
use proptest::prelude::*;

fn cfg() -> OptimizerConfig {
    OptimizerConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assistance_never_hurts(rho in density(vec![2, 2])) {
        let w0 = unassisted_cost(&partial_trace(&rho, &[1]).unwrap());
        prop_assert!(assisted_cost(&rho, &cfg()).unwrap().value <= w0 + 1e-9);
    }

    #[test]
    fn local_unitaries_on_helper_do_not_change_cost(rho in density(vec![2, 2]), u in unitary(2)) {
        let rotated = rho.conjugate_by(&kron(&u, &CMatrix::identity(2, 2))).unwrap();
        let a = assisted_cost(&rho, &cfg()).unwrap().value;
        let b = assisted_cost(&rotated, &cfg()).unwrap().value;
        prop_assert!((a - b).abs() <= 2e-6, "{a} vs {b}");
    }

    #[test]
    fn pure_states_have_zero_koashi_winter_residual(rho in pure(vec![2, 2])) {
        let r = koashi_winter_check(&rho, &cfg()).unwrap();
        prop_assert!(r.residual.abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn qutrit_helper_never_hurts(rho in density(vec![3, 2])) {
        let w0 = unassisted_cost(&partial_trace(&rho, &[1]).unwrap());
        prop_assert!(assisted_cost(&rho, &cfg()).unwrap().value <= w0 + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn separable_states_are_never_exclusive(d in separable()) {
        let report = exclusivity_dd(&d.state(), &cfg(), None).unwrap();
        prop_assert!(!report.exclusive);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn berta_tripartite_bounds(psi in pure(vec![2, 2, 2])) {
        let r = ProjectiveBasis::computational(2);
        let s = ProjectiveBasis::hadamard();
        let c = complementarity(&r, &s).unwrap();
        let be = partial_trace(&psi, &[1, 2]).unwrap();
        let ab = partial_trace(&psi, &[0, 1]).unwrap();
        let cond = |rho, basis: &ProjectiveBasis, measured, side| {
            conditional_vn_entropy_cq(&conditional_ensemble_on(rho, measured, &basis.to_povm(), &[side]).unwrap())
        };
        let r_e = cond(&be, &r, 0, 1);
        let s_e = cond(&be, &s, 0, 1);
        let r_a = cond(&ab, &r, 1, 0);
        let s_a = cond(&ab, &s, 1, 0);
        prop_assert!(r_e + s_a >= c - 1e-9);
        prop_assert!(r_a + s_e >= c - 1e-9);
    }
}

#[test]
fn werner_helper_cost_strictly_decreasing() {
    let values: Vec<f64> = (0..101)
        .map(|i| {
            assisted_cost(&werner_state(i as f64 / 100.0).unwrap(), &cfg())
                .unwrap()
                .value
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}
