mod common;

use common::{density, unitary};
use erasure_core::measurements::{complementarity, conditional_ensemble, dephase};
use erasure_core::numerics::{c, trace_distance, von_neumann_entropy, CMatrix};
use erasure_core::optim::povm_from_params;
use erasure_core::states::partial_trace;
use erasure_core::ProjectiveBasis;
use proptest::prelude::*;

proptest! {
    #[test]
    fn ensemble_average_is_marginal(
        rho in density(vec![2, 3]),
        outcomes in 2usize..=4,
        params in proptest::collection::vec(-2.0f64..2.0, 16),
    ) {
        let m = povm_from_params(&params[..outcomes * outcomes], 2, outcomes);
        let ens = conditional_ensemble(&rho, &m).unwrap();
        let marginal = partial_trace(&rho, &[1]).unwrap();
        prop_assert!(trace_distance(&ens.average(), &marginal).unwrap() <= 1e-9);
    }

    #[test]
    fn dephasing_never_lowers_entropy(rho in density(vec![2, 2]), u in unitary(2), which in 0usize..2) {
        let basis = ProjectiveBasis::new(u).unwrap();
        let out = dephase(&rho, &basis, which).unwrap();
        prop_assert!(von_neumann_entropy(&out) >= von_neumann_entropy(&rho) - 1e-9);
    }

    #[test]
    fn complementarity_symmetric_and_phase_blind(
        u in unitary(3),
        v in unitary(3),
        phases in proptest::collection::vec(0.0f64..6.3, 3),
    ) {
        let r = ProjectiveBasis::new(u.clone()).unwrap();
        let s = ProjectiveBasis::new(v).unwrap();
        let a = complementarity(&r, &s).unwrap();
        prop_assert!((a - complementarity(&s, &r).unwrap()).abs() <= 1e-12);
        let shifted = CMatrix::from_fn(3, 3, |i, j| u[(i, j)] * c(phases[j].cos(), phases[j].sin()));
        let r2 = ProjectiveBasis::new(shifted).unwrap();
        prop_assert!((a - complementarity(&r2, &s).unwrap()).abs() <= 1e-12);
    }
}
