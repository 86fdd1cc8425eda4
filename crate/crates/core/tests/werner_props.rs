use erasure_core::costs::{assisted_cost, eof_two_qubit, OptimizerConfig};
use erasure_core::semidi::{observed_assisted_cost, BasisPair, Strategy};
use erasure_core::states::werner_state;
use erasure_core::werner::{self, werner_closed_forms};
use erasure_core::Execution;
use proptest::prelude::*;

fn grid() -> impl Iterator<Item = f64> {
    (0..101).map(|i| i as f64 / 100.0)
}

#[test]
fn optimizer_matches_closed_form() {
    let cfg = OptimizerConfig::default();
    for p in grid() {
        let row = werner_closed_forms(p).unwrap();
        let rho = werner_state(p).unwrap();
        assert!(
            (assisted_cost(&rho, &cfg).unwrap().value - row.w_a).abs() <= 1e-6,
            "p = {p}"
        );
        assert!(
            (eof_two_qubit(&rho).unwrap().eof - row.w_e_dd).abs() <= 1e-9,
            "p = {p}"
        );
    }
}

#[test]
fn matched_pauli_strategy_reaches_helper_cost() {
    let bases = BasisPair::qubit_mubs();
    let strat = Strategy::honest_matched(&bases);
    for p in grid() {
        let rho = werner_state(p).unwrap();
        let w = observed_assisted_cost(&rho, &bases, &strat).unwrap();
        assert!(
            (w - werner_closed_forms(p).unwrap().w_a).abs() <= 1e-9,
            "p = {p}"
        );
    }
}

#[test]
fn flag_boundaries() {
    let rows = werner::sweep(0.0, 1.0, 101, Execution::Sequential).unwrap();
    let x = werner::crossings();
    for r in &rows {
        assert_eq!(r.entangled, r.p > 1.0 / 3.0);
        assert_eq!(r.sdi_witness, r.p > x.p_sdi);
        assert_eq!(r.dd_exclusive, r.p > x.p_dd);
    }
    assert!(!rows[33].entangled && rows[34].entangled);
    assert!(!rows[77].sdi_witness && rows[78].sdi_witness);
}

proptest! {
    #[test]
    fn closed_forms_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assume!(a < b);
        let (ra, rb) = (werner_closed_forms(a).unwrap(), werner_closed_forms(b).unwrap());
        prop_assert!(ra.w_a > rb.w_a);
        prop_assert!(ra.w_e_dd <= rb.w_e_dd);
    }

    #[test]
    fn discord_route_agrees(p in 0.0f64..=1.0) {
        prop_assert!((werner::assisted_cost_via_discord(p) - werner::assisted_cost(p)).abs() <= 1e-10);
    }
}
