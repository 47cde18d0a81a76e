//! Homodyne, photon-number and register measurements on branch states.
//!
//! All probabilities keep the interference terms between branches: the
//! density of an outcome is `Σ_jk c_j c_k* ⟨rest_k|rest_j⟩ ⟨o|α_j⟩⟨o|α_k⟩*`
//! where `rest` is everything except the measured mode.

use num_complex::Complex64;
use rand::Rng;

use crate::branch::{coherent_overlap, BusId, CoherentBranchState, ComplexAmp, DiscreteId};
use crate::error::{Error, Result};
use crate::unitary;

const FOURTH_ROOT_TWO_PI: f64 = 1.583_233_487_086_159_5; // (2π)^{1/4}
/// Branches whose amplitude falls below this after conditioning are dropped.
const CONDITION_PRUNE: f64 = 1e-15;

/// `⟨x|α⟩` for the quadrature `x(ξ) = a e^{iξ} + a† e^{−iξ}`.
///
/// With `α̃ = α e^{iξ}` this is
/// `(2π)^{−1/4} exp(−(x − 2Re α̃)²/4 + i Im α̃ x − i Re α̃ Im α̃)`.
pub fn quadrature_amplitude(x: f64, alpha: ComplexAmp, xi: f64) -> ComplexAmp {
    let a = alpha * Complex64::cis(xi);
    let d = x - 2.0 * a.re;
    Complex64::from_polar((-0.25 * d * d).exp() / FOURTH_ROOT_TWO_PI, a.im * x - a.re * a.im)
}

/// `⟨n|α⟩ = e^{−|α|²/2} αⁿ/√n!`, evaluated in log space.
pub fn number_amplitude(n: usize, alpha: ComplexAmp) -> ComplexAmp {
    let r = alpha.norm();
    if r == 0.0 {
        return if n == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_fact;
    Complex64::from_polar(ln_mag.exp(), n as f64 * alpha.arg())
}

/// `⟨n|α⟩` for `n = 0..=n_max`.
fn number_amplitudes(n_max: usize, alpha: ComplexAmp) -> Vec<ComplexAmp> {
    let r = alpha.norm();
    if r == 0.0 {
        let mut v = vec![Complex64::new(0.0, 0.0); n_max + 1];
        v[0] = Complex64::new(1.0, 0.0);
        return v;
    }
    let (ln_r, arg) = (r.ln(), alpha.arg());
    let mut ln_fact = 0.0;
    (0..=n_max)
        .map(|n| {
            if n > 0 {
                ln_fact += (n as f64).ln();
            }
            let nf = n as f64;
            Complex64::from_polar((-0.5 * r * r + nf * ln_r - 0.5 * ln_fact).exp(), nf * arg)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomodyneSetting {
    pub xi: f64,
    /// Window extension beyond the extreme peak means, in units of the
    /// vacuum standard deviation.
    pub grid_half_width: f64,
    pub grid_step: f64,
}

impl HomodyneSetting {
    pub fn new(xi: f64) -> Self {
        Self { xi, grid_half_width: 10.0, grid_step: 0.01 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 0.01) {
            return Err(Error::InvalidParameter { name: "grid_step", reason: format!("{} not in (0, 0.01]", self.grid_step) });
        }
        if !(self.grid_half_width >= 10.0) {
            return Err(Error::InvalidParameter {
                name: "grid_half_width",
                reason: format!("{} below 10", self.grid_half_width),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhotonCountSetting {
    /// Explicit cutoff; `None` uses the required cutoff for the state.
    pub n_max: Option<usize>,
    /// Counts in `1..indeterminate_below` are reported as indeterminate by
    /// parity classification. The default of 1 makes the window empty.
    pub indeterminate_below: usize,
}

impl Default for PhotonCountSetting {
    fn default() -> Self {
        Self { n_max: None, indeterminate_below: 1 }
    }
}

/// `⌈|α|² + 10|α| + 20⌉` for the largest branch amplitude.
pub fn required_cutoff(max_abs: f64) -> usize {
    (max_abs * max_abs + 10.0 * max_abs + 20.0).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutcomeValue {
    Quadrature(f64),
    PhotonCount(usize),
}

/// Measurement result without the conditioned state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub value: OutcomeValue,
    /// Probability density for quadratures, probability mass for counts.
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub value: OutcomeValue,
    pub probability: f64,
    pub state: CoherentBranchState,
}

impl MeasurementOutcome {
    pub fn record(&self) -> MeasurementRecord {
        MeasurementRecord { value: self.value, probability: self.probability }
    }
}

/// Bus amplitudes plus the non-zero cross weights `c_j c_k* ⟨rest_k|rest_j⟩`.
#[derive(Clone, Debug)]
struct ReducedMode {
    amps: Vec<ComplexAmp>,
    weights: Vec<(usize, usize, ComplexAmp)>,
}

impl ReducedMode {
    fn new(state: &CoherentBranchState, pos: usize) -> Self {
        let br = state.branches();
        let norm = state.norm_squared();
        let mut weights = Vec::new();
        for (j, bj) in br.iter().enumerate() {
            for (k, bk) in br.iter().enumerate() {
                if bj.register != bk.register {
                    continue;
                }
                let rest: ComplexAmp = bk
                    .bus
                    .iter()
                    .zip(&bj.bus)
                    .enumerate()
                    .filter(|&(m, _)| m != pos)
                    .map(|(_, (&a, &b))| coherent_overlap(a, b))
                    .product();
                let w = bj.amplitude * bk.amplitude.conj() * rest / norm;
                if w != Complex64::new(0.0, 0.0) {
                    weights.push((j, k, w));
                }
            }
        }
        Self { amps: br.iter().map(|b| b.bus[pos]).collect(), weights }
    }

    fn density(&self, projections: &[ComplexAmp]) -> f64 {
        self.weights
            .iter()
            .map(|&(j, k, w)| (w * projections[j] * projections[k].conj()).re)
            .sum()
    }
}

/// Quadrature probability density of a bus mode at `x`.
pub fn homodyne_pdf(state: &CoherentBranchState, bus: BusId, setting: &HomodyneSetting, x: f64) -> Result<f64> {
    let pos = state.bus_position(bus)?;
    let reduced = ReducedMode::new(state, pos);
    let proj: Vec<_> = reduced.amps.iter().map(|&a| quadrature_amplitude(x, a, setting.xi)).collect();
    Ok(reduced.density(&proj))
}

/// Tabulated quadrature distribution for repeated inverse-CDF sampling of
/// one fixed state.
#[derive(Clone, Debug)]
pub struct HomodyneSampler {
    reduced: ReducedMode,
    xi: f64,
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl HomodyneSampler {
    pub fn new(state: &CoherentBranchState, bus: BusId, setting: &HomodyneSetting) -> Result<Self> {
        setting.validate()?;
        let pos = state.bus_position(bus)?;
        let reduced = ReducedMode::new(state, pos);
        let means: Vec<f64> = reduced.amps.iter().map(|a| 2.0 * (a * Complex64::cis(setting.xi)).re).collect();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - setting.grid_half_width;
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + setting.grid_half_width;
        let n = ((hi - lo) / setting.grid_step).ceil() as usize + 1;
        let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * setting.grid_step).collect();
        let mut proj = vec![Complex64::new(0.0, 0.0); reduced.amps.len()];
        let pdf: Vec<f64> = xs
            .iter()
            .map(|&x| {
                for (p, &a) in proj.iter_mut().zip(&reduced.amps) {
                    *p = quadrature_amplitude(x, a, setting.xi);
                }
                reduced.density(&proj).max(0.0)
            })
            .collect();
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in pdf.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * setting.grid_step;
            cdf.push(acc);
        }
        if acc < 1.0 - 1e-4 {
            return Err(Error::GridTooSmall { mass: acc });
        }
        Ok(Self { reduced, xi: setting.xi, xs, cdf })
    }

    pub fn mass(&self) -> f64 {
        *self.cdf.last().unwrap_or(&0.0)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let proj: Vec<_> = self.reduced.amps.iter().map(|&a| quadrature_amplitude(x, a, self.xi)).collect();
        self.reduced.density(&proj)
    }

    /// Inverse CDF of a uniform variate, linear within each grid cell.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.mass();
        let i = self.cdf.partition_point(|&c| c < target).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

fn condition(
    state: &CoherentBranchState,
    bus: BusId,
    mut factor: impl FnMut(ComplexAmp) -> ComplexAmp,
) -> Result<(CoherentBranchState, f64)> {
    let pos = state.mode_position(bus)?;
    let before = state.norm_squared();
    let mut out = state.clone();
    for b in out.branches_mut().iter_mut() {
        b.amplitude *= factor(b.bus[pos]);
    }
    out.consume_mode(bus)?;
    out.merge_duplicates(crate::branch::MERGE_TOLERANCE);
    let weight = out.norm_squared() / before;
    if !(weight > 0.0) {
        return Err(Error::ZeroNorm);
    }
    out.normalize()?;
    out.prune(CONDITION_PRUNE)?;
    out.normalize()?;
    Ok((out, weight))
}

/// Project a bus mode onto quadrature value `x`; returns the conditioned
/// state and the probability density of `x`.
pub fn condition_on_quadrature(
    state: &CoherentBranchState,
    bus: BusId,
    xi: f64,
    x: f64,
) -> Result<(CoherentBranchState, f64)> {
    state.bus_position(bus)?;
    condition(state, bus, |a| quadrature_amplitude(x, a, xi))
}

pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    bus: BusId,
    setting: &HomodyneSetting,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let sampler = HomodyneSampler::new(state, bus, setting)?;
    let x = sampler.sample(rng);
    let (state, density) = condition_on_quadrature(state, bus, setting.xi, x)?;
    Ok(MeasurementOutcome { value: OutcomeValue::Quadrature(x), probability: density, state })
}

fn resolve_cutoff(state: &CoherentBranchState, pos: usize, setting: &PhotonCountSetting) -> Result<usize> {
    let max_abs = state.branches().iter().map(|b| b.bus[pos].norm()).fold(0.0, f64::max);
    let required = required_cutoff(max_abs);
    match setting.n_max {
        Some(given) if given < required => Err(Error::CutoffViolation { given, required }),
        Some(given) => Ok(given),
        None => Ok(required),
    }
}

/// Photon-number distribution `P(0..=n_max)` of a bus mode.
pub fn photon_number_distribution(
    state: &CoherentBranchState,
    bus: BusId,
    setting: &PhotonCountSetting,
) -> Result<Vec<f64>> {
    let pos = state.bus_position(bus)?;
    let n_max = resolve_cutoff(state, pos, setting)?;
    let reduced = ReducedMode::new(state, pos);
    let table: Vec<Vec<ComplexAmp>> = reduced.amps.iter().map(|&a| number_amplitudes(n_max, a)).collect();
    let mut proj = vec![Complex64::new(0.0, 0.0); table.len()];
    let dist: Vec<f64> = (0..=n_max)
        .map(|n| {
            for (p, row) in proj.iter_mut().zip(&table) {
                *p = row[n];
            }
            reduced.density(&proj).max(0.0)
        })
        .collect();
    let mass: f64 = dist.iter().sum();
    if mass < 1.0 - 1e-8 {
        return Err(Error::CutoffViolation { given: n_max, required: n_max + 1 });
    }
    Ok(dist)
}

pub fn photon_number_pmf(
    state: &CoherentBranchState,
    bus: BusId,
    setting: &PhotonCountSetting,
    n: usize,
) -> Result<f64> {
    let dist = photon_number_distribution(state, bus, setting)?;
    dist.get(n).copied().ok_or(Error::PhotonNumberOutOfRange { n, n_max: dist.len() - 1 })
}

/// Project a bus mode onto `|n⟩`; returns the conditioned state and `P(n)`.
pub fn condition_on_photon_number(
    state: &CoherentBranchState,
    bus: BusId,
    n: usize,
) -> Result<(CoherentBranchState, f64)> {
    state.bus_position(bus)?;
    condition(state, bus, |a| number_amplitude(n, a))
}

/// Inverse-CDF draw from a discrete distribution.
pub(crate) fn draw_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let total: f64 = dist.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn photon_number_measure<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    bus: BusId,
    setting: &PhotonCountSetting,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let dist = photon_number_distribution(state, bus, setting)?;
    let n = draw_index(&dist, rng);
    let (state, p) = condition_on_photon_number(state, bus, n)?;
    Ok(MeasurementOutcome { value: OutcomeValue::PhotonCount(n), probability: p, state })
}

/// Index of the midpoint bin containing `x`; a value exactly on a boundary
/// goes to the lower bin.
pub fn classify_peaks(x: f64, peak_means: &[f64]) -> Result<usize> {
    if peak_means.is_empty() {
        return Err(Error::EmptyPeaks);
    }
    if peak_means.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::UnsortedPeaks);
    }
    Ok(peak_means
        .windows(2)
        .position(|w| x <= 0.5 * (w[0] + w[1]))
        .unwrap_or(peak_means.len() - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitBasis {
    /// {H, V}
    Computational,
    /// {D, D̄} = {(H+V)/√2, (H−V)/√2}
    Diagonal,
}

/// Probabilities of outcomes 0 and 1 for a qubit in the given basis.
pub fn qubit_probabilities(state: &CoherentBranchState, q: DiscreteId, basis: QubitBasis) -> Result<[f64; 2]> {
    let rotated;
    let s = match basis {
        QubitBasis::Computational => state,
        QubitBasis::Diagonal => {
            let mut r = state.clone();
            r.apply_register_unitary(q, &unitary::hadamard())?;
            rotated = r;
            &rotated
        }
    };
    let pos = s.register_position(q)?;
    let total = s.norm_squared();
    let mut probs = [0.0; 2];
    for (bit, p) in probs.iter_mut().enumerate() {
        let mut part = s.clone();
        part.branches_mut().retain(|b| b.register[pos] as usize == bit);
        *p = if part.branch_count() == 0 { 0.0 } else { part.norm_squared() / total };
    }
    Ok(probs)
}

/// Project a qubit onto outcome `bit` in `basis` and remove it from the
/// register. Returns the conditioned state and the outcome probability.
pub fn project_qubit(
    state: &CoherentBranchState,
    q: DiscreteId,
    basis: QubitBasis,
    bit: u16,
) -> Result<(CoherentBranchState, f64)> {
    let mut s = state.clone();
    if !matches!(s.discrete_kind(q)?, crate::branch::DiscreteKind::Qubit) {
        return Err(Error::NotAQubit(q.index()));
    }
    if basis == QubitBasis::Diagonal {
        s.apply_register_unitary(q, &unitary::hadamard())?;
    }
    let pos = s.register_position(q)?;
    let total = s.norm_squared();
    s.branches_mut().retain(|b| b.register[pos] == bit);
    if s.branch_count() == 0 {
        return Err(Error::ZeroNorm);
    }
    s.consume_register(q)?;
    s.merge_duplicates(crate::branch::MERGE_TOLERANCE);
    let p = s.norm_squared() / total;
    if !(p > 0.0) {
        return Err(Error::ZeroNorm);
    }
    s.normalize()?;
    Ok((s, p))
}

pub fn measure_qubit<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    q: DiscreteId,
    basis: QubitBasis,
    rng: &mut R,
) -> Result<(u16, CoherentBranchState, f64)> {
    let probs = qubit_probabilities(state, q, basis)?;
    let bit = draw_index(&probs, rng) as u16;
    let (s, p) = project_qubit(state, q, basis, bit)?;
    Ok((bit, s, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::DiscreteKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn integrate(f: impl Fn(f64) -> Complex64, lo: f64, hi: f64, step: f64) -> Complex64 {
        let n = ((hi - lo) / step) as usize;
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            acc += f(lo + i as f64 * step);
        }
        acc * step
    }

    #[test]
    fn quadrature_wavefunction_is_gaussian() {
        let alpha = c(2.0, 0.0);
        let mass = integrate(|x| c(quadrature_amplitude(x, alpha, 0.0).norm_sqr(), 0.0), -10.0, 15.0, 0.005);
        let mean = integrate(|x| c(x * quadrature_amplitude(x, alpha, 0.0).norm_sqr(), 0.0), -10.0, 15.0, 0.005);
        let second = integrate(|x| c(x * x * quadrature_amplitude(x, alpha, 0.0).norm_sqr(), 0.0), -10.0, 15.0, 0.005);
        assert!((mass.re - 1.0).abs() < 1e-10);
        assert!((mean.re - 4.0).abs() < 1e-10);
        assert!((second.re - 16.0 - 1.0).abs() < 1e-9);
        let v = quadrature_amplitude(0.3, c(0.0, 0.0), 1.0).norm_sqr();
        let normal = (-0.3f64 * 0.3 / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - normal).abs() < 1e-15);
    }

    #[test]
    fn quadrature_completeness_gives_overlap() {
        for (a, b, xi) in [(c(1.0, 0.5), c(-0.5, 1.2), 0.0), (c(2.0, -1.0), c(1.5, 0.0), 0.7)] {
            let integral = integrate(
                |x| quadrature_amplitude(x, a, xi).conj() * quadrature_amplitude(x, b, xi),
                -20.0,
                20.0,
                0.002,
            );
            assert!((integral - coherent_overlap(a, b)).norm() < 1e-8, "{integral} vs {}", coherent_overlap(a, b));
        }
    }

    fn kerr_state(amps: &[Complex64], alpha: f64, theta: f64) -> (CoherentBranchState, BusId) {
        let mut s = CoherentBranchState::new();
        let m = s.add_register(DiscreteKind::Fock { levels: amps.len() }, amps).unwrap();
        let p = s.add_bus(c(alpha, 0.0));
        s.cross_kerr(m, p, theta).unwrap();
        (s, p)
    }

    #[test]
    fn single_branch_pdf() {
        let (s, p) = kerr_state(&[c(1.0, 0.0)], 1.5, 0.0);
        let set = HomodyneSetting::new(0.3);
        let mean = 2.0 * 1.5 * 0.3f64.cos();
        for x in [-1.0, 0.0, 2.0, 4.5] {
            let want = (-(x - mean) * (x - mean) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((homodyne_pdf(&s, p, &set, x).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn kerr_state_pdf_has_three_weighted_peaks() {
        let amps = [c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0)];
        let (alpha, theta) = (40.0, 0.2);
        let (s, p) = kerr_state(&amps, alpha, theta);
        let set = HomodyneSetting::new(FRAC_PI_2);
        for (n, a) in amps.iter().enumerate() {
            let mu = -2.0 * alpha * (n as f64 * theta).sin();
            let want = a.norm_sqr() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((homodyne_pdf(&s, p, &set, mu).unwrap() - want).abs() < 1e-12);
        }
        let sampler = HomodyneSampler::new(&s, p, &set).unwrap();
        assert!((sampler.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn interference_terms_are_kept() {
        // one register value, bus in (|α⟩ + |−α⟩)/N
        let mut s = CoherentBranchState::new();
        let q = s.add_qubit([c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        let p = s.add_bus(c(2.0, 0.0));
        s.cross_kerr(q, p, std::f64::consts::PI).unwrap();
        s.apply_register_unitary(q, &unitary::hadamard()).unwrap();
        let mut cat = s.clone();
        cat.branches_mut().retain(|b| b.register[0] == 0);
        cat.normalize().unwrap();
        let set = HomodyneSetting::new(FRAC_PI_2);
        let coherent = homodyne_pdf(&cat, p, &set, 0.7).unwrap();
        let incoherent: f64 = cat
            .branches()
            .iter()
            .map(|b| b.amplitude.norm_sqr() * quadrature_amplitude(0.7, b.bus[0], FRAC_PI_2).norm_sqr())
            .sum::<f64>()
            / cat.branches().iter().map(|b| b.amplitude.norm_sqr()).sum::<f64>();
        assert!((coherent - incoherent).abs() > 1e-2);
    }

    #[test]
    fn photon_pmf_examples() {
        let (s, p) = kerr_state(&[c(1.0, 0.0)], 0.0, 0.0);
        let set = PhotonCountSetting::default();
        assert!((photon_number_pmf(&s, p, &set, 0).unwrap() - 1.0).abs() < 1e-15);

        let theta = 0.01;
        let alpha = std::f64::consts::PI / theta;
        let mut s = CoherentBranchState::new();
        let p = s.add_bus(c(alpha, 0.0) * Complex64::cis(theta));
        s.displace(p, c(-alpha, 0.0)).unwrap();
        let dist = photon_number_distribution(&s, p, &set).unwrap();
        let want = (-2.0 * alpha * alpha * (1.0 - theta.cos())).exp();
        assert!((dist[0] - want).abs() < 1e-12 * want.max(1.0));
        let mean: f64 = dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - 2.0 * alpha * alpha * (1.0 - theta.cos())).abs() < 1e-8);
        assert!(((dist.iter().sum::<f64>()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cutoff_violation_rejected() {
        let mut s = CoherentBranchState::new();
        let p = s.add_bus(c(3.0, 0.0));
        let set = PhotonCountSetting { n_max: Some(10), ..Default::default() };
        assert!(matches!(photon_number_distribution(&s, p, &set), Err(Error::CutoffViolation { .. })));
        let auto = PhotonCountSetting::default();
        let dist = photon_number_distribution(&s, p, &auto).unwrap();
        assert!(matches!(photon_number_pmf(&s, p, &auto, dist.len()), Err(Error::PhotonNumberOutOfRange { .. })));
    }

    #[test]
    fn zero_theta_count_leaves_register() {
        let amps = [c(0.6, 0.0), c(0.8, 0.0)];
        let (s, p) = kerr_state(&amps, 0.0, 0.0);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let out = photon_number_measure(&s, p, &PhotonCountSetting::default(), &mut rng).unwrap();
        assert_eq!(out.value, OutcomeValue::PhotonCount(0));
        assert!((out.probability - 1.0).abs() < 1e-15);
        let a: Vec<_> = out.state.branches().iter().map(|b| b.amplitude).collect();
        assert!((a[0] - amps[0]).norm() < 1e-15 && (a[1] - amps[1]).norm() < 1e-15);
    }

    #[test]
    fn homodyne_conditioning_single_branch() {
        let mut s = CoherentBranchState::new();
        let q = s.add_qubit([c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let p = s.add_bus(c(1.0, 2.0));
        let before = s.reduced_density_matrix(&[q]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let out = homodyne_sample(&s, p, &HomodyneSetting::new(0.4), &mut rng).unwrap();
        let after = out.state.reduced_density_matrix(&[q]).unwrap();
        assert!(after.max_abs_diff(&before) < 1e-14);
        assert!(out.state.is_normalized());
        assert!(out.probability > 0.0);
    }

    #[test]
    fn homodyne_sample_mean() {
        let mut s = CoherentBranchState::new();
        let alpha = c(1.2, -0.7);
        let p = s.add_bus(alpha);
        let xi = 0.9;
        let sampler = HomodyneSampler::new(&s, p, &HomodyneSetting::new(xi)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let n = 100_000;
        let mean = (0..n).map(|_| sampler.sample(&mut rng)).sum::<f64>() / n as f64;
        let want = 2.0 * (alpha * Complex64::cis(xi)).re;
        assert!((mean - want).abs() < 3.0 * 10f64.powf(-2.5), "{mean} vs {want}");
    }

    #[test]
    fn grid_too_coarse_rejected() {
        let mut s = CoherentBranchState::new();
        let p = s.add_bus(c(1.0, 0.0));
        let bad = HomodyneSetting { grid_step: 0.05, ..HomodyneSetting::new(0.0) };
        assert!(HomodyneSampler::new(&s, p, &bad).is_err());
        let narrow = HomodyneSetting { grid_half_width: 3.0, ..HomodyneSetting::new(0.0) };
        assert!(HomodyneSampler::new(&s, p, &narrow).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_peaks(1.9, &[0.0, 4.0]).unwrap(), 0);
        assert_eq!(classify_peaks(2.0, &[0.0, 4.0]).unwrap(), 0);
        assert_eq!(classify_peaks(2.0001, &[0.0, 4.0]).unwrap(), 1);
        assert_eq!(classify_peaks(-7.0, &[-3.0, 0.0, 4.0]).unwrap(), 0);
        assert_eq!(classify_peaks(70.0, &[-3.0, 0.0, 4.0]).unwrap(), 2);
        assert!(matches!(classify_peaks(0.0, &[]), Err(Error::EmptyPeaks)));
        assert!(matches!(classify_peaks(0.0, &[1.0, 1.0]), Err(Error::UnsortedPeaks)));
    }

    #[test]
    fn gaussian_misclassification_rate() {
        // Gaussian(0,1) samples against peaks {0, 2α sin θ}
        let (alpha, theta) = (150.0, 0.01);
        let sep = 2.0 * alpha * f64::sin(theta);
        let mut s = CoherentBranchState::new();
        let p = s.add_bus(c(0.0, 0.0));
        let sampler = HomodyneSampler::new(&s, p, &HomodyneSetting::new(0.0)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let n = 200_000;
        let wrong = (0..n).filter(|_| classify_peaks(sampler.sample(&mut rng), &[0.0, sep]).unwrap() != 0).count();
        let rate = wrong as f64 / n as f64;
        let want = crate::analytics::homodyne_error(alpha, theta).unwrap().0;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((rate - want).abs() < 4.0 * se, "{rate} vs {want}");
    }

    #[test]
    fn qubit_projection() {
        let mut s = CoherentBranchState::new();
        let q = s.add_qubit([c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        let r = s.add_qubit([c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let pr = qubit_probabilities(&s, q, QubitBasis::Computational).unwrap();
        assert!((pr[0] - 0.36).abs() < 1e-15 && (pr[1] - 0.64).abs() < 1e-15);
        let pd = qubit_probabilities(&s, q, QubitBasis::Diagonal).unwrap();
        assert!((pd[0] - 0.98).abs() < 1e-14);
        let (after, p) = project_qubit(&s, q, QubitBasis::Computational, 1).unwrap();
        assert!((p - 0.64).abs() < 1e-15);
        assert_eq!(after.active_discrete(), vec![r]);
        assert!(after.is_normalized());
    }
}
