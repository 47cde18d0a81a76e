//! Two polarization qubits share one probe beam; counting the probe's
//! photons after a displacement projects them onto even or odd parity.

use std::f64::consts::PI;

use kerrbus::analytics;
use kerrbus::protocols::{parity_gate, ParityGateConfig};
use kerrbus::CoherentBranchState;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> kerrbus::Result<()> {
    let theta: f64 = 0.01;
    let config = ParityGateConfig::new(PI / theta.sin(), theta);
    let amps = [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];

    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..6 {
        let mut s = CoherentBranchState::new();
        let a = s.add_qubit(amps)?;
        let b = s.add_qubit(amps)?;
        let (out, post) = parity_gate(&s, a, b, &config, &mut rng)?;
        let rho = post.reduced_density_matrix(&[a, b])?;
        let pops: Vec<String> = (0..4).map(|i| format!("{:.3}", rho.entry(i, i).re)).collect();
        println!(
            "{:<5} value {:?}  corrections {}  HH/HV/VH/VV {}",
            out.parity.as_str(),
            out.record.value,
            out.corrections.len(),
            pops.join(" ")
        );
    }
    let b = analytics::ErrorBudget::new(config.alpha, theta, 0.0)?;
    println!("odd read as even with probability {:.2e}", b.parity_misclass);
    println!("mean photons in the odd branch {:.3}", b.mean_odd_photons);
    Ok(())
}
