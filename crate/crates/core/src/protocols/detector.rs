//! QND photon-number detector and the heralded single-photon source built on it.

use num_complex::Complex64;
use rand::Rng;

use crate::branch::{BusId, CoherentBranchState, ComplexAmp, DiscreteId, DiscreteKind};
use crate::error::{Error, Result};
use crate::measure::{self, classify_peaks, number_amplitude, HomodyneSampler, HomodyneSetting};

/// Peaks closer than this are treated as one bin.
const COINCIDENT_PEAKS: f64 = 1e-9;
/// Largest signal amplitude accepted by the source.
const MAX_SOURCE_AMPLITUDE: f64 = 2.0;
const SOURCE_LEAK: f64 = 1e-6;

#[derive(Clone, Debug)]
struct PeakGroup {
    mean: f64,
    members: Vec<usize>,
    priors: Vec<f64>,
}

/// Detector for a fixed signal state `Σ c_n |n⟩`: the probe interaction
/// and the quadrature distribution are computed once, so repeated trials
/// only draw and classify.
#[derive(Clone, Debug)]
pub struct QndDetector {
    alpha: f64,
    theta: f64,
    xi: f64,
    state: CoherentBranchState,
    register: DiscreteId,
    bus: BusId,
    sampler: HomodyneSampler,
    groups: Vec<PeakGroup>,
    group_means: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct QndOutcome {
    pub estimate: usize,
    pub x: f64,
    /// Probability density of `x`.
    pub density: f64,
    /// Signal register after the probe has been measured.
    pub state: CoherentBranchState,
    pub register: DiscreteId,
}

impl QndDetector {
    pub fn new(signal: &[ComplexAmp], alpha: f64, theta: f64, xi: f64) -> Result<Self> {
        Self::with_setting(signal, alpha, theta, HomodyneSetting::new(xi))
    }

    pub fn with_setting(signal: &[ComplexAmp], alpha: f64, theta: f64, setting: HomodyneSetting) -> Result<Self> {
        if signal.is_empty() {
            return Err(Error::InvalidParameter { name: "signal", reason: "no amplitudes".into() });
        }
        let norm: f64 = signal.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter { name: "signal", reason: format!("norm {norm} is not 1") });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha", reason: format!("{alpha} must be positive") });
        }
        let mut state = CoherentBranchState::new();
        let register = state.add_register(DiscreteKind::Fock { levels: signal.len() }, signal)?;
        let bus = state.add_bus(Complex64::new(alpha, 0.0));
        state.cross_kerr(register, bus, theta)?;
        let sampler = HomodyneSampler::new(&state, bus, &setting)?;

        let mut order: Vec<(f64, usize)> = (0..signal.len())
            .map(|n| (2.0 * alpha * (n as f64 * theta + setting.xi).cos(), n))
            .collect();
        order.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut groups: Vec<PeakGroup> = Vec::new();
        for (mean, n) in order {
            let prior = signal[n].norm_sqr();
            match groups.last_mut() {
                Some(g) if (mean - g.mean).abs() <= COINCIDENT_PEAKS * mean.abs().max(1.0) => {
                    g.members.push(n);
                    g.priors.push(prior);
                }
                _ => groups.push(PeakGroup { mean, members: vec![n], priors: vec![prior] }),
            }
        }
        let group_means = groups.iter().map(|g| g.mean).collect();
        Ok(Self { alpha, theta, xi: setting.xi, state, register, bus, sampler, groups, group_means })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Peak mean for each photon number.
    pub fn peaks(&self) -> Vec<f64> {
        crate::analytics::detector_peaks(self.alpha, self.theta, self.xi, self.levels())
    }

    pub fn levels(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }

    /// State after the interaction, before the probe is measured.
    pub fn interacted_state(&self) -> &CoherentBranchState {
        &self.state
    }

    /// Photon-number estimate for a quadrature value. Coincident peaks are
    /// resolved by a draw from the prior weights.
    pub fn classify<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> usize {
        let g = &self.groups[classify_peaks(x, &self.group_means).unwrap_or(0)];
        if g.members.len() == 1 {
            return g.members[0];
        }
        let total: f64 = g.priors.iter().sum();
        if total == 0.0 {
            return g.members[0];
        }
        g.members[measure::draw_index(&g.priors, rng)]
    }

    /// `(estimate, x)` without building the conditioned state.
    pub fn sample_estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let x = self.sampler.sample(rng);
        (self.classify(x, rng), x)
    }

    pub fn condition(&self, x: f64) -> Result<(CoherentBranchState, f64)> {
        measure::condition_on_quadrature(&self.state, self.bus, self.xi, x)
    }

    pub fn detect<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QndOutcome> {
        let (estimate, x) = self.sample_estimate(rng);
        let (state, density) = self.condition(x)?;
        Ok(QndOutcome { estimate, x, density, state, register: self.register })
    }
}

/// Single-shot detection of the signal `Σ c_n |n⟩`.
pub fn qnd_photon_detect<R: Rng + ?Sized>(
    signal: &[ComplexAmp],
    alpha: f64,
    theta: f64,
    xi: f64,
    rng: &mut R,
) -> Result<QndOutcome> {
    QndDetector::new(signal, alpha, theta, xi)?.detect(rng)
}

/// Truncated, renormalized coherent amplitudes `⟨n|α_a⟩`. Without an
/// explicit cutoff the smallest one leaking less than 1e-6 is used.
pub fn source_amplitudes(alpha_a: f64, cutoff: Option<usize>) -> Result<Vec<ComplexAmp>> {
    if !(0.0..=MAX_SOURCE_AMPLITUDE).contains(&alpha_a) {
        return Err(Error::InvalidParameter {
            name: "alpha_a",
            reason: format!("{alpha_a} outside [0, {MAX_SOURCE_AMPLITUDE}]"),
        });
    }
    let a = Complex64::new(alpha_a, 0.0);
    let mut amps = Vec::new();
    let mut mass = 0.0;
    loop {
        let n = amps.len();
        let z = number_amplitude(n, a);
        mass += z.norm_sqr();
        amps.push(z);
        match cutoff {
            Some(levels) if amps.len() >= levels => break,
            None if 1.0 - mass < SOURCE_LEAK && amps.len() >= 2 => break,
            _ => {}
        }
    }
    if 1.0 - mass >= SOURCE_LEAK {
        return Err(Error::InvalidParameter {
            name: "signal_cutoff",
            reason: format!("leaks {:.3e} of the signal", 1.0 - mass),
        });
    }
    let s = mass.sqrt();
    Ok(amps.into_iter().map(|z| z / s).collect())
}

#[derive(Clone, Debug)]
pub struct HeraldOutcome {
    pub estimate: usize,
    pub heralded: bool,
    pub x: f64,
    pub state: CoherentBranchState,
    pub register: DiscreteId,
}

/// Weak coherent signal followed by the QND detector; success when one
/// photon is detected.
#[derive(Clone, Debug)]
pub struct HeraldedSource {
    alpha_a: f64,
    detector: QndDetector,
}

impl HeraldedSource {
    pub fn new(alpha_a: f64, signal_cutoff: Option<usize>, alpha: f64, theta: f64) -> Result<Self> {
        let amps = source_amplitudes(alpha_a, signal_cutoff)?;
        Ok(Self { alpha_a, detector: QndDetector::new(&amps, alpha, theta, std::f64::consts::FRAC_PI_2)? })
    }

    pub fn alpha_a(&self) -> f64 {
        self.alpha_a
    }

    pub fn detector(&self) -> &QndDetector {
        &self.detector
    }

    pub fn sample_estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.detector.sample_estimate(rng).0
    }

    pub fn fire<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HeraldOutcome> {
        let o = self.detector.detect(rng)?;
        Ok(HeraldOutcome { estimate: o.estimate, heralded: o.estimate == 1, x: o.x, state: o.state, register: o.register })
    }
}

pub fn prepare_heralded_photon<R: Rng + ?Sized>(
    alpha_a: f64,
    signal_cutoff: Option<usize>,
    alpha: f64,
    theta: f64,
    rng: &mut R,
) -> Result<HeraldOutcome> {
    HeraldedSource::new(alpha_a, signal_cutoff, alpha, theta)?.fire(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_photon_is_found() {
        let alpha = 2.0 * PI / 0.01f64.sin();
        let det = QndDetector::new(&[c(0.0), c(1.0), c(0.0)], alpha, 0.01, FRAC_PI_2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(det.sample_estimate(&mut rng).0, 1);
        }
        let out = det.detect(&mut rng).unwrap();
        assert_eq!(out.state.register_values(out.register).unwrap(), vec![1]);
    }

    #[test]
    fn peaks_follow_photon_number() {
        let det = QndDetector::new(&[c(0.6), c(0.8)], 10.0, 0.1, FRAC_PI_2).unwrap();
        let p = det.peaks();
        assert!(p[0].abs() < 1e-12);
        assert!((p[1] + 20.0 * 0.1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_is_a_blind_guess() {
        let s = [c(0.6), c(0.8)];
        let det = QndDetector::new(&s, 10.0, 0.0, FRAC_PI_2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let trials = 20_000;
        let ones = (0..trials).filter(|_| det.sample_estimate(&mut rng).0 == 1).count();
        let rate = ones as f64 / trials as f64;
        assert!((rate - 0.64).abs() < 4.0 * (0.64 * 0.36 / trials as f64).sqrt(), "{rate}");
        let (post, _) = det.condition(0.3).unwrap();
        let mut input = CoherentBranchState::new();
        input.add_register(DiscreteKind::Fock { levels: 2 }, &s).unwrap();
        assert!(post.fidelity(&input).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn source_amplitudes_are_poisson() {
        let amps = source_amplitudes(1.0, None).unwrap();
        assert!((amps[1].norm_sqr() - (-1.0f64).exp()).abs() < 1e-6);
        assert_eq!(source_amplitudes(0.0, None).unwrap()[0], c(1.0));
        assert!(source_amplitudes(2.5, None).is_err());
        assert!(source_amplitudes(1.5, Some(3)).is_err());
    }

    #[test]
    fn vacuum_never_heralds() {
        let src = HeraldedSource::new(0.0, None, 2.0 * PI / 0.01f64.sin(), 0.01).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert!((0..1000).all(|_| src.sample_estimate(&mut rng) != 1));
    }
}
