//! A CNOT built from a Bell pair, two parity gates, two ancilla
//! measurements and Pauli feed-forward.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use kerrbus::analytics::fidelity;
use kerrbus::protocols::{cnot, cnot_enumeration, cnot_target, ParityGateConfig};
use kerrbus::CoherentBranchState;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> kerrbus::Result<()> {
    let theta: f64 = 0.01;
    let config = ParityGateConfig::new(2.0 * PI / theta.sin(), theta);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut rng = ChaCha20Rng::seed_from_u64(5);

    let inputs = [("HH", [one, zero], [one, zero]), ("VH", [zero, one], [one, zero]), ("VV", [zero, one], [zero, one]), ("DH", [h, h], [one, zero])];
    for (label, c_amps, t_amps) in inputs {
        let mut s = CoherentBranchState::new();
        let c = s.add_qubit(c_amps)?;
        let t = s.add_qubit(t_amps)?;
        let run = cnot(&s, c, t, &config, &mut rng)?;
        let want = cnot_target([c_amps[0] * t_amps[0], c_amps[0] * t_amps[1], c_amps[1] * t_amps[0], c_amps[1] * t_amps[1]]);
        let f = fidelity(&run.state.reduced_density_matrix(&[c, t])?, &want)?;
        println!("{label}: outcomes {:?} fidelity {f:.12}", run.outcomes);
    }

    let probe = [Complex64::new(0.3, 0.1), Complex64::new(-0.5, 0.2), Complex64::new(0.4, -0.3), Complex64::new(0.2, 0.55)];
    let rows = cnot_enumeration(&config, probe, 1e-8)?;
    let ok = rows.iter().filter(|r| r.passes(1e-8)).count();
    println!("feed-forward table: {ok}/{} outcome combinations verified", rows.len());
    Ok(())
}
