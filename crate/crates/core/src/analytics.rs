//! Closed-form error predictions and two-qubit state metrics.
//!
//! The formulas here double as test oracles for the simulated protocols, so
//! none of them call into the branch simulator.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use libm::erfc;

use crate::error::{Error, Result};
use crate::protocols::Parity;

/// Density matrix over a list of discrete modes, first mode most significant.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, matrix: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), matrix.nrows());
        Self { dims, matrix }
    }

    /// `|ψ⟩⟨ψ|` for a normalized `psi`.
    pub fn pure(dims: Vec<usize>, psi: &[Complex64]) -> Self {
        let n = psi.len();
        let m = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj());
        Self::new(dims, m)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Hermitian within 1e-12, unit trace within 1e-10, eigenvalues ≥ −1e-10.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        let t = (self.trace() - 1.0).abs();
        let min = self.eigenvalues().last().copied().unwrap_or(0.0);
        if h > 1e-12 || t > 1e-10 || min < -1e-10 {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("hermiticity {h:.2e}, trace error {t:.2e}, min eigenvalue {min:.2e}"),
            });
        }
        Ok(())
    }

    /// Largest entrywise distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hermitian square root, negative eigenvalues clamped to zero.
    fn sqrt(&self) -> DMatrix<Complex64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)));
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }
}

/// `⟨ψ|ρ|ψ⟩` for a normalized target.
pub fn fidelity(rho: &DensityMatrix, target: &[Complex64]) -> Result<f64> {
    if target.len() != rho.dim() {
        return Err(Error::LayoutMismatch);
    }
    let mut f = Complex64::new(0.0, 0.0);
    for i in 0..target.len() {
        for j in 0..target.len() {
            f += target[i].conj() * rho.entry(i, j) * target[j];
        }
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dims() != [2, 2] {
        return Err(Error::InvalidParameter { name: "rho", reason: "concurrence needs two qubits".into() });
    }
    // σ_y ⊗ σ_y is real: anti-diagonal (−1, 1, 1, −1)
    let yy = DMatrix::from_fn(4, 4, |i, j| {
        if i + j == 3 {
            Complex64::new(if i == 0 || i == 3 { -1.0 } else { 1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let flipped = &yy * rho.matrix().conjugate() * &yy;
    let s = rho.sqrt();
    let r = &s * flipped * &s;
    let r = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
    let mut lambdas: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// (column index, amplitude) of `P|bit⟩`.
    fn act(self, bit: usize) -> (usize, Complex64) {
        match self {
            Pauli::I => (bit, Complex64::new(1.0, 0.0)),
            Pauli::X => (bit ^ 1, Complex64::new(1.0, 0.0)),
            Pauli::Y => (bit ^ 1, if bit == 0 { Complex64::i() } else { -Complex64::i() }),
            Pauli::Z => (bit, Complex64::new(if bit == 0 { 1.0 } else { -1.0 }, 0.0)),
        }
    }
}

/// `Tr(ρ P₁⊗…⊗P_n)` for a multi-qubit density matrix.
pub fn pauli_expectation(rho: &DensityMatrix, paulis: &[Pauli]) -> Result<f64> {
    if rho.dims().len() != paulis.len() || rho.dims().iter().any(|&d| d != 2) {
        return Err(Error::LayoutMismatch);
    }
    let n = paulis.len();
    let mut total = Complex64::new(0.0, 0.0);
    for col in 0..rho.dim() {
        // P|col⟩ = amp |row⟩
        let mut row = 0usize;
        let mut amp = Complex64::new(1.0, 0.0);
        for (q, p) in paulis.iter().enumerate() {
            let bit = (col >> (n - 1 - q)) & 1;
            let (out, a) = p.act(bit);
            row |= out << (n - 1 - q);
            amp *= a;
        }
        // Tr(ρP) = Σ_col ⟨col|ρ P|col⟩
        total += rho.entry(col, row) * amp;
    }
    Ok(total.re)
}

/// Two-peak homodyne discrimination error and the multi-peak bound:
/// `(½ erfc(|α| sin θ/√2), erfc(|α| sin θ/√2))`.
pub fn homodyne_error(alpha: f64, theta: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter { name: "alpha", reason: format!("{alpha} must be positive") });
    }
    let e = erfc(alpha.abs() * theta.sin().abs() / SQRT_2);
    Ok((0.5 * e, e.min(1.0)))
}

/// Homodyne peak means `2 Re(α e^{i(nθ+ξ)})` for `n = 0..levels`.
pub fn detector_peaks(alpha: f64, theta: f64, xi: f64, levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|n| 2.0 * alpha * (n as f64 * theta + xi).cos())
        .collect()
}

/// Exact probability that photon number `n` lands outside its own midpoint
/// bin, given peaks for `0..levels` photons. Fails on coincident peaks.
pub fn detector_misclassification(alpha: f64, theta: f64, xi: f64, n: usize, levels: usize) -> Result<f64> {
    let peaks = detector_peaks(alpha, theta, xi, levels);
    let mu = *peaks.get(n).ok_or(Error::InvalidParameter {
        name: "n",
        reason: format!("{n} outside 0..{levels}"),
    })?;
    let mut sorted = peaks.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[1] - w[0] <= 1e-12) {
        return Err(Error::UnsortedPeaks);
    }
    let idx = sorted.iter().position(|&p| p == mu).unwrap_or(0);
    let mut err = 0.0;
    if idx > 0 {
        let lo = 0.5 * (sorted[idx - 1] + mu);
        err += 0.5 * erfc((mu - lo) / SQRT_2);
    }
    if idx + 1 < sorted.len() {
        let hi = 0.5 * (sorted[idx + 1] + mu);
        err += 0.5 * erfc((hi - mu) / SQRT_2);
    }
    Ok(err)
}

/// Poisson weight `e^{−α_a²} α_a^{2n} / n!` of heralding `n` photons.
pub fn heralding_prob(alpha_a: f64, n: usize) -> f64 {
    let mean = alpha_a * alpha_a;
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (-mean + n as f64 * mean.ln() - ln_fact).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParams {
    pub gamma: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub mean_odd_photons: f64,
}

/// Loss-induced dephasing `γ = η²α²(1−cos θ)`, mixture weights
/// `λ± = ½(1 ± e^{−γ})` and the displaced odd-branch mean photon number
/// `2(1−η²)α²(1−cos θ)`.
pub fn loss_params(eta: f64, alpha: f64, theta: f64) -> Result<LossParams> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidLoss(eta));
    }
    let one_minus_cos = 1.0 - theta.cos();
    let gamma = eta * eta * alpha * alpha * one_minus_cos;
    let decay = (-gamma).exp();
    Ok(LossParams {
        gamma,
        lambda_plus: 0.5 * (1.0 + decay),
        lambda_minus: 0.5 * (1.0 - decay),
        mean_odd_photons: 2.0 * (1.0 - eta * eta) * alpha * alpha * one_minus_cos,
    })
}

/// Probability that an odd-parity component still yields zero photons
/// after the displacement: `exp(−2(1−η²)α²(1−cos θ))`.
pub fn parity_misclass(alpha: f64, theta: f64, eta: f64) -> f64 {
    (-2.0 * (1.0 - eta * eta) * alpha * alpha * (1.0 - theta.cos())).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiCorrection {
    /// `n tan⁻¹(cot(θ/2)) = n(π/2 − θ/2)`.
    pub formula: f64,
    /// Phase picked up per branch by the number projection of the displaced
    /// odd component `α(e^{iθ}−1)`: `n(π/2 + θ/2)`. This is what the
    /// feed-forward removes.
    pub applied: f64,
}

pub fn phi_correction(n: usize, theta: f64) -> PhiCorrection {
    let n = n as f64;
    PhiCorrection {
        formula: n * (1.0 / (theta / 2.0).tan()).atan(),
        applied: n * (FRAC_PI_2 + theta / 2.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorBudget {
    pub p_err_two_peak: f64,
    pub p_err_total_bound: f64,
    pub parity_misclass: f64,
    pub gamma: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub mean_odd_photons: f64,
}

impl ErrorBudget {
    pub fn new(alpha: f64, theta: f64, eta: f64) -> Result<Self> {
        let (two, total) = homodyne_error(alpha, theta)?;
        let loss = loss_params(eta, alpha, theta)?;
        Ok(Self {
            p_err_two_peak: two,
            p_err_total_bound: total,
            parity_misclass: parity_misclass(alpha, theta, eta),
            gamma: loss.gamma,
            lambda_plus: loss.lambda_plus,
            lambda_minus: loss.lambda_minus,
            mean_odd_photons: loss.mean_odd_photons,
        })
    }
}

/// Two-qubit mixture left by the lossy parity gate on the product input
/// `(c₊|H⟩ + c₋|V⟩)(d₊|H⟩ + d₋|V⟩)`:
/// `λ₊|Ψ⁺⟩⟨Ψ⁺| + λ₋|Ψ⁻⟩⟨Ψ⁻|` for even and the same with `Φ±` for odd, where
/// `Ψ± = c±d±|HH⟩ ± c∓d∓|VV⟩` and `Φ± = c±d∓|HV⟩ ± c∓d±|VH⟩`, each
/// normalized. This agrees with the exact reduced state when
/// `|c₊d₊| = |c₋d₋|` (even) or `|c₊d₋| = |c₋d₊|` (odd).
pub fn predicted_mixture(
    c: [Complex64; 2],
    d: [Complex64; 2],
    eta: f64,
    alpha: f64,
    theta: f64,
    parity: Parity,
) -> Result<DensityMatrix> {
    let loss = loss_params(eta, alpha, theta)?;
    let zero = Complex64::new(0.0, 0.0);
    let (plus, minus) = match parity {
        Parity::Even => (
            [c[0] * d[0], zero, zero, c[1] * d[1]],
            [c[1] * d[1], zero, zero, -(c[0] * d[0])],
        ),
        Parity::Odd => (
            [zero, c[0] * d[1], c[1] * d[0], zero],
            [zero, c[1] * d[0], -(c[0] * d[1]), zero],
        ),
        Parity::Indeterminate => {
            return Err(Error::InvalidParameter { name: "parity", reason: "no prediction for indeterminate".into() })
        }
    };
    let unit = |v: [Complex64; 4]| -> Result<[Complex64; 4]> {
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(v.map(|z| z / n))
    };
    let (plus, minus) = (unit(plus)?, unit(minus)?);
    let m = DMatrix::from_fn(4, 4, |i, j| {
        plus[i] * plus[j].conj() * loss.lambda_plus + minus[i] * minus[j].conj() * loss.lambda_minus
    });
    Ok(DensityMatrix::new(vec![2, 2], m))
}
