//! A weak coherent pulse measured by the QND detector heralds a single
//! photon whenever one photon is found.

use std::f64::consts::PI;

use kerrbus::analytics::heralding_prob;
use kerrbus::protocols::HeraldedSource;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> kerrbus::Result<()> {
    let theta: f64 = 0.01;
    let alpha = 2.0 * PI / theta.sin();
    let trials = 20_000;
    println!("alpha_a   herald-1 rate   e^-a^2 a^2");
    for alpha_a in [0.5, 1.0, 1.5] {
        let src = HeraldedSource::new(alpha_a, None, alpha, theta)?;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let hits = (0..trials).filter(|_| src.sample_estimate(&mut rng) == 1).count();
        println!("{alpha_a:7.2}   {:13.4}   {:10.4}", hits as f64 / trials as f64, heralding_prob(alpha_a, 1));
    }

    let src = HeraldedSource::new(1.0, None, alpha, theta)?;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let shot = loop {
        let o = src.fire(&mut rng)?;
        if o.heralded {
            break o;
        }
    };
    println!("heralded signal holds {:?} photons", shot.state.register_values(shot.register)?);
    Ok(())
}
