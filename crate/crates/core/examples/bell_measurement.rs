//! Two parity gates, one in H/V and one in the diagonal basis, tell the
//! four Bell states apart without destroying them.

use std::f64::consts::PI;

use kerrbus::analytics::fidelity;
use kerrbus::protocols::{bell_measurement, BellIndex, ParityGateConfig};
use kerrbus::CoherentBranchState;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> kerrbus::Result<()> {
    let theta: f64 = 0.01;
    let config = ParityGateConfig::new(2.0 * PI / theta.sin(), theta);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for input in BellIndex::ALL {
        let mut s = CoherentBranchState::new();
        let q = s.add_qubits(2, &input.amplitudes())?;
        let m = bell_measurement(&s, q[0], q[1], &config, &mut rng)?;
        let second = m.second.as_ref().map(|o| o.parity.as_str()).unwrap_or("-");
        let found = m.index.map_or("none", BellIndex::name);
        let f = fidelity(&m.state.reduced_density_matrix(&q)?, &input.amplitudes())?;
        println!("{:<5} -> ({}, {}) = {:<5} fidelity {f:.10}", input.name(), m.first.parity.as_str(), second, found);
    }
    Ok(())
}
