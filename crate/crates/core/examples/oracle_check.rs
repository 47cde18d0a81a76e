//! The coherent-branch simulator against a truncated Fock-space
//! simulation of the same operations.

use std::f64::consts::PI;

use kerrbus::oracle::{displacement_phase, equivalence_checks};

fn main() -> kerrbus::Result<()> {
    for (alpha, theta, eta) in [(2.0, 0.3, 0.3), (3.0, 1.0, 0.0)] {
        println!("alpha {alpha} theta {theta} eta {eta}");
        for c in equivalence_checks(alpha, theta, eta)? {
            println!("  {:<24} {:.2e} (tolerance {:.0e}) {}", c.name, c.value, c.tolerance, if c.passed() { "ok" } else { "FAILED" });
        }
        let p = displacement_phase(alpha, theta)?;
        let want = (alpha * alpha * theta.sin() + PI).rem_euclid(2.0 * PI) - PI;
        println!("  phase of <a(e^it-1)|D(-a)|a e^it> = {p:.12}, a^2 sin t mod 2pi = {want:.12}");
    }
    Ok(())
}
