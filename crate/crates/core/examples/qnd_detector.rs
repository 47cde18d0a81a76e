//! Non-demolition photon counting: a probe picks up a phase per signal
//! photon and an x-quadrature homodyne reads it back.
//!
//! ```text
//! cargo run --release --example qnd_detector
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use kerrbus::analytics;
use kerrbus::protocols::QndDetector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> kerrbus::Result<()> {
    let theta: f64 = 0.01;
    let alpha = PI / theta.sin();
    let c = |r: f64| Complex64::new(r, 0.0);
    // equal superposition of 0, 1 and 2 photons
    let signal = [c(1.0 / 3f64.sqrt()), c(1.0 / 3f64.sqrt()), c(1.0 / 3f64.sqrt())];
    let det = QndDetector::new(&signal, alpha, theta, FRAC_PI_2)?;
    println!("peak means: {:?}", det.peaks());

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..5 {
        let out = det.detect(&mut rng)?;
        let rho = out.state.reduced_density_matrix(&[out.register])?;
        let pops: Vec<String> = (0..3).map(|n| format!("{:.4}", rho.entry(n, n).re)).collect();
        println!("x = {:+8.3}  estimate {}  P(0,1,2) after {}", out.x, out.estimate, pops.join(" "));
    }

    let (two_peak, bound) = analytics::homodyne_error(alpha, theta)?;
    println!("error per neighbour {two_peak:.3e}, total bound {bound:.3e}");
    Ok(())
}
