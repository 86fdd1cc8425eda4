mod common;

use common::{density, unitary};
use erasure_core::numerics::{shannon_entropy, von_neumann_entropy, ProbabilityDistribution};
use erasure_core::DensityMatrix;
use proptest::prelude::*;

proptest! {
    #[test]
    fn entropy_is_concave(rho in density(vec![3]), sigma in density(vec![3]), t in 0.0f64..=1.0) {
        let mixed = DensityMatrix::new(rho.matrix().scale(t) + sigma.matrix().scale(1.0 - t), vec![3]).unwrap();
        let lhs = von_neumann_entropy(&mixed);
        let rhs = t * von_neumann_entropy(&rho) + (1.0 - t) * von_neumann_entropy(&sigma);
        prop_assert!(lhs >= rhs - 1e-9, "{lhs} < {rhs}");
    }

    #[test]
    fn entropy_is_unitarily_invariant(rho in density(vec![4]), u in unitary(4)) {
        let rotated = rho.conjugate_by(&u).unwrap();
        prop_assert!((von_neumann_entropy(&rotated) - von_neumann_entropy(&rho)).abs() <= 1e-9);
    }

    #[test]
    fn shannon_of_spectrum_is_von_neumann(rho in density(vec![2, 2])) {
        let spectrum = ProbabilityDistribution::new(rho.eigenvalues()).unwrap();
        prop_assert!((shannon_entropy(&spectrum) - von_neumann_entropy(&rho)).abs() <= 1e-10);
    }

    #[test]
    fn entropy_is_bounded_by_log_dim(rho in density(vec![3])) {
        let s = von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12 && s <= 3f64.log2() + 1e-12);
    }
}
