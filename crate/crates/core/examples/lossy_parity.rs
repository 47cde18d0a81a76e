//! Bus loss between the two qubits: the even outcome leaves a mixture of
//! two Bell-like states with weights (1 ± e^-γ)/2.

use std::f64::consts::PI;

use kerrbus::analytics::{self, concurrence, loss_params, predicted_mixture};
use kerrbus::measure::OutcomeValue;
use kerrbus::protocols::{ParityGate, ParityGateConfig, Parity};
use kerrbus::CoherentBranchState;
use num_complex::Complex64;

fn main() -> kerrbus::Result<()> {
    let alpha = 300.0;
    let theta = PI / alpha;
    let d = [Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
    println!("eta     gamma      C(sim)     e^-gamma   max|sim-pred|");
    for eta in [0.0, 0.05, 0.1, 0.3] {
        let mut s = CoherentBranchState::new();
        let a = s.add_qubit(d)?;
        let b = s.add_qubit(d)?;
        let gate = ParityGate::new(ParityGateConfig::new(alpha, theta).with_eta(eta))?;
        let (_, post) = gate.prepare(&s, a, b)?.condition(OutcomeValue::PhotonCount(0))?;
        let mut rho = post.reduced_density_matrix(&[a, b])?;
        // drop the few-1e-5 odd weight left by misread odd components
        let m = rho.matrix().clone();
        let mut even = m.clone();
        for i in 0..4 {
            for j in 0..4 {
                if !(matches!(i, 0 | 3) && matches!(j, 0 | 3)) {
                    even[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let tr = even[(0, 0)].re + even[(3, 3)].re;
        rho = analytics::DensityMatrix::new(vec![2, 2], even / Complex64::new(tr, 0.0));
        let pred = predicted_mixture(d, d, eta, alpha, theta, Parity::Even)?;
        let g = loss_params(eta, alpha, theta)?.gamma;
        println!(
            "{eta:<6}  {g:.6}  {:.8}  {:.8}  {:.2e}",
            concurrence(&rho)?,
            (-g).exp(),
            rho.max_abs_diff(&pred)
        );
    }
    Ok(())
}
