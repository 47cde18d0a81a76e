//! Single-qubit matrices used by the protocols and their feed-forward.

use nalgebra::Matrix2;
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity() -> Matrix2<Complex64> {
    Matrix2::identity()
}

pub fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, -Complex64::i(), Complex64::i(), ZERO)
}

pub fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// Balanced rotation mapping {H, V} onto {D, D̄} = {(H+V)/√2, (H−V)/√2}.
pub fn hadamard() -> Matrix2<Complex64> {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Matrix2::new(h, h, h, -h)
}

/// diag(e^{i·h}, e^{i·v}).
pub fn phase_diag(h: f64, v: f64) -> Matrix2<Complex64> {
    Matrix2::new(Complex64::cis(h), ZERO, ZERO, Complex64::cis(v))
}

/// diag(e^{−iφ}, e^{+iφ}): removes a relative phase e^{+iφ} on H and e^{−iφ} on V.
pub fn counter_rotation(phi: f64) -> Matrix2<Complex64> {
    phase_diag(-phi, phi)
}

/// Largest entry of |U†U − 1|.
pub fn unitarity_defect(u: &Matrix2<Complex64>) -> f64 {
    let d = u.adjoint() * u - Matrix2::identity();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
