use kerrbus::oracle::{displacement_phase, equivalence_checks};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn primitives_match_the_fock_oracle(alpha in 0.3f64..3.0, theta in 0.01f64..3.1, eta in 0.0f64..0.6) {
        for c in equivalence_checks(alpha, theta, eta).unwrap() {
            prop_assert!(c.passed(), "{} = {:.3e} at alpha {alpha} theta {theta} eta {eta}", c.name, c.value);
        }
    }

    #[test]
    fn displacement_phase_is_positive_sine(alpha in 0.2f64..3.0, theta in 0.01f64..1.0) {
        let p = displacement_phase(alpha, theta).unwrap();
        let want = alpha * alpha * theta.sin();
        let d = (p - want + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        prop_assert!(d.abs() < 1e-8, "{p} vs {want}");
    }
}

#[test]
fn out_of_regime_is_refused() {
    assert!(equivalence_checks(3.01, 0.1, 0.0).is_err());
    assert!(equivalence_checks(1.0, 0.1, 1.5).is_err());
}
