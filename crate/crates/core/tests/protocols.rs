use std::f64::consts::PI;

use kerrbus::analytics::{self, fidelity, parity_misclass};
use kerrbus::measure::{self, OutcomeValue};
use kerrbus::protocols::{Parity, ParityGate, ParityGateConfig, ParityMeasurement};
use kerrbus::CoherentBranchState;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn ideal() -> ParityGateConfig {
    ParityGateConfig::new(2.0 * PI / 0.01f64.sin(), 0.01)
}

fn random_pair(rng: &mut ChaCha20Rng) -> [Complex64; 4] {
    let mut v = [Complex64::new(0.0, 0.0); 4];
    for z in &mut v {
        *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

fn span(psi: [Complex64; 4], parity: Parity) -> [Complex64; 4] {
    let z = Complex64::new(0.0, 0.0);
    let v = match parity {
        Parity::Even => [psi[0], z, z, psi[3]],
        _ => [z, psi[1], psi[2], z],
    };
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

#[test]
fn parity_is_conserved() {
    // odd leakage into n = 0 is exp(-(alpha theta)^2), below 1e-18 here
    let cfg = ParityGateConfig::new(3.0 * PI / 0.01f64.sin(), 0.01);
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for _ in 0..10 {
        let psi = random_pair(&mut rng);
        let mut s = CoherentBranchState::new();
        let q = s.add_qubits(2, &psi).unwrap();
        let prep = ParityGate::new(cfg).unwrap().prepare(&s, q[0], q[1]).unwrap();
        let (even, _) = prep.condition(OutcomeValue::PhotonCount(0)).unwrap();
        let (odd, _) = prep.condition(prep.representative(Parity::Odd).unwrap()).unwrap();
        assert!(even.wrong_parity_weight <= 1e-18, "{}", even.wrong_parity_weight);
        assert!(odd.wrong_parity_weight <= 1e-18, "{}", odd.wrong_parity_weight);
    }
}

#[test]
fn repeated_gate_repeats_parity() {
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    for eta in [0.0, 0.1] {
        let alpha = PI / 0.01f64.sin();
        let cfg = ParityGateConfig::new(alpha, 0.01).with_eta(eta);
        let bound = 1.0 - 2.0 * parity_misclass(alpha, 0.01, eta);
        for _ in 0..5 {
            let mut s = CoherentBranchState::new();
            let q = s.add_qubits(2, &random_pair(&mut rng)).unwrap();
            let gate = ParityGate::new(cfg).unwrap();
            let (first, post) = gate.run(&s, q[0], q[1], &mut rng).unwrap();
            let again = gate.prepare(&post, q[0], q[1]).unwrap();
            let p_even = again.count_distribution().unwrap()[0];
            let same = if first.parity == Parity::Even { p_even } else { 1.0 - p_even };
            assert!(same >= bound, "{same} < {bound}");
        }
    }
}

#[test]
fn corrections_replay_backwards() {
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    for m in [ParityMeasurement::PhotonCount, ParityMeasurement::HomodyneX0] {
        let cfg = ParityGateConfig::new(40.0, 0.2).with_eta(0.05).with_measurement(m);
        let mut s = CoherentBranchState::new();
        let q = s.add_qubits(2, &random_pair(&mut rng)).unwrap();
        let prep = ParityGate::new(cfg).unwrap().prepare(&s, q[0], q[1]).unwrap();
        for _ in 0..4 {
            let value = prep.sample_value(&mut rng);
            let (out, mut post) = prep.condition(value).unwrap();
            out.corrections.undo(&mut post).unwrap();
            let (raw, _) = match value {
                OutcomeValue::PhotonCount(n) => measure::condition_on_photon_number(prep.displaced(), prep.bus(), n),
                OutcomeValue::Quadrature(x) => {
                    measure::condition_on_quadrature(prep.displaced(), prep.bus(), cfg.homodyne.xi, x)
                }
            }
            .unwrap();
            let overlap = post.inner_product(&raw).unwrap();
            assert!((overlap - 1.0).norm() < 1e-12, "{overlap}");
        }
    }
}

#[test]
fn lossless_conditioning_is_a_projection() {
    let mut rng = ChaCha20Rng::seed_from_u64(24);
    for _ in 0..10 {
        let psi = random_pair(&mut rng);
        let mut s = CoherentBranchState::new();
        let q = s.add_qubits(2, &psi).unwrap();
        let prep = ParityGate::new(ideal()).unwrap().prepare(&s, q[0], q[1]).unwrap();
        let dist = prep.count_distribution().unwrap().to_vec();
        for (n, p) in dist.iter().enumerate() {
            if *p < 1e-6 {
                continue;
            }
            let (out, post) = prep.condition(OutcomeValue::PhotonCount(n)).unwrap();
            let rho = post.reduced_density_matrix(&q).unwrap();
            let f = fidelity(&rho, &span(psi, out.parity)).unwrap();
            assert!(f >= 1.0 - 1e-9, "n={n} f={f}");
        }
    }
}

#[test]
fn misclassification_follows_the_closed_form() {
    let alpha = PI / 0.01;
    let cfg = ParityGateConfig::new(alpha, 0.01);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut s = CoherentBranchState::new();
    let a = s.add_qubit([one, zero]).unwrap();
    let b = s.add_qubit([zero, one]).unwrap();
    let prep = ParityGate::new(cfg).unwrap().prepare(&s, a, b).unwrap();
    let p0 = prep.count_distribution().unwrap()[0];
    let want = analytics::parity_misclass(alpha, 0.01, 0.0);
    assert!((p0 - want).abs() < 1e-10 * want, "{p0} {want}");
}
