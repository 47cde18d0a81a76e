//! Two-qubit parity gate on a coherent bus.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;

use super::{CorrectionReason, FeedForwardRecord, Parity};
use crate::branch::{BusId, CoherentBranchState, DiscreteId, DiscreteKind};
use crate::error::{Error, Result};
use crate::measure::{
    self, classify_peaks, HomodyneSampler, HomodyneSetting, MeasurementRecord, OutcomeValue, PhotonCountSetting,
    QubitBasis,
};
use crate::unitary;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParityMeasurement {
    /// Number-resolving QND count of the displaced bus.
    PhotonCount,
    /// Homodyne `x(0)` of the displaced bus.
    HomodyneX0,
}

/// Where the lossy stretch of the bus sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossPlacement {
    /// After A's interaction, before B's.
    BetweenQubits,
    /// After both interactions and the `−θ` phase, before displacement.
    BeforeDetection,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParityGateConfig {
    pub alpha: f64,
    pub theta: f64,
    pub eta: f64,
    pub measurement: ParityMeasurement,
    pub basis: QubitBasis,
    pub static_phase_correction: bool,
    pub feed_forward: bool,
    pub loss_placement: LossPlacement,
    /// Minimum odd-branch mean photon number (or homodyne peak distance)
    /// before the gate flags itself as degraded.
    pub min_separation: f64,
    pub count: PhotonCountSetting,
    pub homodyne: HomodyneSetting,
}

impl ParityGateConfig {
    pub fn new(alpha: f64, theta: f64) -> Self {
        Self {
            alpha,
            theta,
            eta: 0.0,
            measurement: ParityMeasurement::PhotonCount,
            basis: QubitBasis::Computational,
            static_phase_correction: true,
            feed_forward: true,
            loss_placement: LossPlacement::BetweenQubits,
            min_separation: 5.0,
            count: PhotonCountSetting::default(),
            homodyne: HomodyneSetting::new(0.0),
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_basis(mut self, basis: QubitBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_measurement(mut self, m: ParityMeasurement) -> Self {
        self.measurement = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter { name: "alpha", reason: format!("{} must be positive", self.alpha) });
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter { name: "theta", reason: "not finite".into() });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidLoss(self.eta));
        }
        if !(self.min_separation >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "min_separation",
                reason: format!("{} is negative", self.min_separation),
            });
        }
        Ok(())
    }

    /// `√(1−η²)`.
    pub fn transmission(&self) -> f64 {
        (1.0 - self.eta * self.eta).sqrt()
    }

    /// Odd-branch mean photon number after displacement,
    /// `2(1−η²)α²(1−cos θ)`.
    pub fn odd_mean_photons(&self) -> f64 {
        2.0 * (1.0 - self.eta * self.eta) * self.alpha * self.alpha * (1.0 - self.theta.cos())
    }

    /// Position of the odd homodyne peak, `2τα(cos θ − 1)`; the even peak
    /// sits at 0.
    pub fn odd_homodyne_peak(&self) -> f64 {
        2.0 * self.transmission() * self.alpha * (self.theta.cos() - 1.0)
    }

    pub fn separation(&self) -> f64 {
        match self.measurement {
            ParityMeasurement::PhotonCount => self.odd_mean_photons(),
            ParityMeasurement::HomodyneX0 => self.odd_homodyne_peak().abs(),
        }
    }

    pub fn degraded(&self) -> bool {
        self.separation() < self.min_separation
    }

    /// Phase `τ²α² sin θ` of the odd branches from the displacement.
    pub fn displacement_phase(&self) -> f64 {
        let t = self.transmission();
        t * t * self.alpha * self.alpha * self.theta.sin()
    }
}

/// Loss on individual links, with optional per-gate overrides of the probe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorModelParams {
    pub eta_per_link: Vec<f64>,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
}

impl ErrorModelParams {
    pub fn uniform(eta: f64, links: usize) -> Self {
        Self { eta_per_link: vec![eta; links], alpha: None, theta: None }
    }

    pub fn validate(&self) -> Result<()> {
        for &eta in &self.eta_per_link {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidLoss(eta));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter { name: "alpha", reason: format!("{a} must be positive") });
            }
        }
        if let Some(t) = self.theta {
            if !t.is_finite() {
                return Err(Error::InvalidParameter { name: "theta", reason: "not finite".into() });
            }
        }
        Ok(())
    }

    /// `base` with this model's overrides for `link`. Links without an
    /// entry keep the base loss.
    pub fn config_for_link(&self, base: &ParityGateConfig, link: usize) -> Result<ParityGateConfig> {
        self.validate()?;
        let mut c = *base;
        if let Some(&eta) = self.eta_per_link.get(link) {
            c.eta = eta;
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(t) = self.theta {
            c.theta = t;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct ParityOutcome {
    pub parity: Parity,
    pub record: MeasurementRecord,
    pub corrections: FeedForwardRecord,
    pub degraded: bool,
    /// Population left on the opposite parity span after conditioning.
    pub wrong_parity_weight: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ParityGate {
    config: ParityGateConfig,
}

impl ParityGate {
    pub fn new(config: ParityGateConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ParityGateConfig {
        &self.config
    }

    /// Fresh bus, both interactions, loss and the `−θ` phase, without the
    /// displacement. In the diagonal basis the qubits are left rotated.
    pub fn entangle(&self, state: &CoherentBranchState, a: DiscreteId, b: DiscreteId) -> Result<Entangled> {
        if a == b {
            return Err(Error::SameQubit);
        }
        for q in [a, b] {
            if state.discrete_kind(q)? != DiscreteKind::Qubit {
                return Err(Error::NotAQubit(q.index()));
            }
        }
        let c = &self.config;
        let mut s = state.clone();
        if c.basis == QubitBasis::Diagonal {
            s.apply_register_unitary(a, &unitary::hadamard())?;
            s.apply_register_unitary(b, &unitary::hadamard())?;
        }
        let bus = s.add_bus(Complex64::new(c.alpha, 0.0));
        let mut environment = None;
        s.cross_kerr_on_value(a, bus, c.theta, 0)?;
        if c.eta > 0.0 && c.loss_placement == LossPlacement::BetweenQubits {
            environment = Some(s.loss_channel(bus, c.eta)?);
        }
        s.cross_kerr_on_value(b, bus, c.theta, 1)?;
        s.bus_phase(bus, -c.theta)?;
        if c.eta > 0.0 && c.loss_placement == LossPlacement::BeforeDetection {
            environment = Some(s.loss_channel(bus, c.eta)?);
        }
        Ok(Entangled { state: s, bus, environment, a, b })
    }

    /// Everything up to the measurement, with the outcome distribution
    /// tabulated.
    pub fn prepare(&self, state: &CoherentBranchState, a: DiscreteId, b: DiscreteId) -> Result<PreparedParity> {
        let ent = self.entangle(state, a, b)?;
        let mut s = ent.state.clone();
        s.displace(ent.bus, Complex64::new(-self.config.transmission() * self.config.alpha, 0.0))?;
        let table = match self.config.measurement {
            ParityMeasurement::PhotonCount => {
                OutcomeTable::Counts(measure::photon_number_distribution(&s, ent.bus, &self.config.count)?)
            }
            ParityMeasurement::HomodyneX0 => {
                OutcomeTable::Quadrature(HomodyneSampler::new(&s, ent.bus, &self.config.homodyne)?)
            }
        };
        Ok(PreparedParity { config: self.config, entangled: ent, displaced: s, table })
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        state: &CoherentBranchState,
        a: DiscreteId,
        b: DiscreteId,
        rng: &mut R,
    ) -> Result<(ParityOutcome, CoherentBranchState)> {
        self.prepare(state, a, b)?.sample(rng)
    }
}

/// Pre-displacement state of the gate.
#[derive(Clone, Debug)]
pub struct Entangled {
    pub state: CoherentBranchState,
    pub bus: BusId,
    pub environment: Option<BusId>,
    pub a: DiscreteId,
    pub b: DiscreteId,
}

#[derive(Clone, Debug)]
enum OutcomeTable {
    Counts(Vec<f64>),
    Quadrature(HomodyneSampler),
}

/// A parity gate stopped just before its measurement.
#[derive(Clone, Debug)]
pub struct PreparedParity {
    config: ParityGateConfig,
    entangled: Entangled,
    displaced: CoherentBranchState,
    table: OutcomeTable,
}

impl PreparedParity {
    pub fn entangled(&self) -> &Entangled {
        &self.entangled
    }

    pub fn displaced(&self) -> &CoherentBranchState {
        &self.displaced
    }

    pub fn bus(&self) -> BusId {
        self.entangled.bus
    }

    /// Photon-number distribution, for the counting measurement.
    pub fn count_distribution(&self) -> Option<&[f64]> {
        match &self.table {
            OutcomeTable::Counts(d) => Some(d),
            OutcomeTable::Quadrature(_) => None,
        }
    }

    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomeValue {
        match &self.table {
            OutcomeTable::Counts(d) => OutcomeValue::PhotonCount(measure::draw_index(d, rng)),
            OutcomeTable::Quadrature(s) => OutcomeValue::Quadrature(s.sample(rng)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(ParityOutcome, CoherentBranchState)> {
        self.condition(self.sample_value(rng))
    }

    pub fn classify(&self, value: OutcomeValue) -> Parity {
        match value {
            OutcomeValue::PhotonCount(0) => Parity::Even,
            OutcomeValue::PhotonCount(n) if n < self.config.count.indeterminate_below => Parity::Indeterminate,
            OutcomeValue::PhotonCount(_) => Parity::Odd,
            OutcomeValue::Quadrature(x) => {
                let odd = self.config.odd_homodyne_peak();
                if odd >= 0.0 {
                    return Parity::Even;
                }
                match classify_peaks(x, &[odd, 0.0]) {
                    Ok(0) => Parity::Odd,
                    _ => Parity::Even,
                }
            }
        }
    }

    /// A representative outcome for a parity: zero photons or the even
    /// peak for even, the most likely odd outcome for odd.
    pub fn representative(&self, parity: Parity) -> Result<OutcomeValue> {
        match (&self.table, parity) {
            (OutcomeTable::Counts(_), Parity::Even) => Ok(OutcomeValue::PhotonCount(0)),
            (OutcomeTable::Counts(d), Parity::Odd) => {
                let lo = self.config.count.indeterminate_below.max(1);
                (lo..d.len())
                    .filter(|&n| d[n] > 0.0)
                    .max_by(|&i, &j| d[i].total_cmp(&d[j]))
                    .map(OutcomeValue::PhotonCount)
                    .ok_or(Error::ZeroNorm)
            }
            (OutcomeTable::Counts(_), Parity::Indeterminate) => {
                if self.config.count.indeterminate_below > 1 {
                    Ok(OutcomeValue::PhotonCount(1))
                } else {
                    Err(Error::InvalidParameter { name: "parity", reason: "no indeterminate window".into() })
                }
            }
            (OutcomeTable::Quadrature(_), Parity::Even) => Ok(OutcomeValue::Quadrature(0.0)),
            (OutcomeTable::Quadrature(_), Parity::Odd) => Ok(OutcomeValue::Quadrature(self.config.odd_homodyne_peak())),
            (OutcomeTable::Quadrature(_), Parity::Indeterminate) => {
                Err(Error::InvalidParameter { name: "parity", reason: "homodyne has no indeterminate window".into() })
            }
        }
    }

    /// Condition on a measurement value and apply the configured
    /// corrections.
    pub fn condition(&self, value: OutcomeValue) -> Result<(ParityOutcome, CoherentBranchState)> {
        let c = &self.config;
        let bus = self.entangled.bus;
        let (a, b) = (self.entangled.a, self.entangled.b);
        let (mut s, probability) = match value {
            OutcomeValue::PhotonCount(n) => measure::condition_on_photon_number(&self.displaced, bus, n)?,
            OutcomeValue::Quadrature(x) => measure::condition_on_quadrature(&self.displaced, bus, c.homodyne.xi, x)?,
        };
        let parity = self.classify(value);
        let wrong_parity_weight = match parity {
            Parity::Indeterminate => 0.0,
            p => parity_weight(&s, a, b, p == Parity::Even)?,
        };

        let mut pending: Vec<(DiscreteId, Matrix2<Complex64>, CorrectionReason)> = Vec::new();
        if parity != Parity::Indeterminate {
            if c.static_phase_correction {
                let s_phase = c.displacement_phase();
                pending.push((a, unitary::phase_diag(-s_phase / 2.0, s_phase / 2.0), CorrectionReason::StaticDisplacementPhase));
                pending.push((b, unitary::phase_diag(s_phase / 2.0, -s_phase / 2.0), CorrectionReason::StaticDisplacementPhase));
                if c.eta > 0.0 {
                    let e2a2 = c.eta * c.eta * c.alpha * c.alpha;
                    match c.loss_placement {
                        LossPlacement::BetweenQubits => {
                            let chi = e2a2 * c.theta.sin();
                            pending.push((a, unitary::counter_rotation(chi / 2.0), CorrectionReason::LossyPhaseCorrection));
                        }
                        LossPlacement::BeforeDetection => {
                            let psi = e2a2 * (2.0 * c.theta).sin();
                            pending.push((a, unitary::phase_diag(-psi / 4.0, psi / 4.0), CorrectionReason::LossyPhaseCorrection));
                            pending.push((b, unitary::phase_diag(psi / 4.0, -psi / 4.0), CorrectionReason::LossyPhaseCorrection));
                        }
                    }
                }
            }
            if c.feed_forward && parity == Parity::Odd {
                let phi = match value {
                    OutcomeValue::PhotonCount(n) => crate::analytics::phi_correction(n, c.theta).applied,
                    OutcomeValue::Quadrature(x) => {
                        let ta = c.transmission() * c.alpha;
                        ta * c.theta.sin() * (x - ta * (c.theta.cos() - 1.0))
                    }
                };
                pending.push((a, unitary::counter_rotation(phi), CorrectionReason::PhiCorrection));
            }
        }

        let h = unitary::hadamard();
        if c.basis == QubitBasis::Diagonal {
            s.apply_register_unitary(a, &h)?;
            s.apply_register_unitary(b, &h)?;
        }
        let mut corrections = FeedForwardRecord::default();
        for (target, u, reason) in pending {
            let u = match c.basis {
                QubitBasis::Computational => u,
                QubitBasis::Diagonal => h * u * h,
            };
            corrections.apply(&mut s, target, u, reason)?;
        }
        let outcome = ParityOutcome {
            parity,
            record: MeasurementRecord { value, probability },
            corrections,
            degraded: c.degraded(),
            wrong_parity_weight,
        };
        Ok((outcome, s))
    }
}

/// Population of the odd span (when `even` is true) or the even span.
fn parity_weight(state: &CoherentBranchState, a: DiscreteId, b: DiscreteId, even: bool) -> Result<f64> {
    let va = state.register_values(a)?;
    let vb = state.register_values(b)?;
    let total = state.norm_squared();
    let mut part = state.clone();
    let mut i = 0;
    part.branches_mut().retain(|_| {
        let keep = (va[i] == vb[i]) != even;
        i += 1;
        keep
    });
    if part.branch_count() == 0 {
        return Ok(0.0);
    }
    Ok(part.norm_squared() / total)
}

/// One run of the parity gate on qubits `a`, `b`.
pub fn parity_gate<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    a: DiscreteId,
    b: DiscreteId,
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<(ParityOutcome, CoherentBranchState)> {
    ParityGate::new(*config)?.run(state, a, b, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ideal() -> ParityGateConfig {
        ParityGateConfig::new(2.0 * PI / 0.01f64.sin(), 0.01)
    }

    fn two_qubits(amps: [Complex64; 4]) -> (CoherentBranchState, DiscreteId, DiscreteId) {
        let mut s = CoherentBranchState::new();
        let q = s.add_qubits(2, &amps).unwrap();
        s.normalize().unwrap();
        (s, q[0], q[1])
    }

    fn target(s: &CoherentBranchState, amps: [Complex64; 4]) -> CoherentBranchState {
        let mut t = CoherentBranchState::new();
        t.add_qubits(2, &amps).unwrap();
        t.normalize().unwrap();
        assert_eq!(t.active_discrete().len(), s.active_discrete().len());
        t
    }

    #[test]
    fn probe_phases_before_displacement() {
        let (s, a, b) = two_qubits([c(0.5, 0.0); 4]);
        let cfg = ParityGateConfig::new(3.0, 0.2);
        let ent = ParityGate::new(cfg).unwrap().entangle(&s, a, b).unwrap();
        let va = ent.state.register_values(a).unwrap();
        let vb = ent.state.register_values(b).unwrap();
        let amps = ent.state.bus_amplitudes(ent.bus).unwrap();
        for i in 0..4 {
            let expect = match (va[i], vb[i]) {
                (0, 1) => 0.2,
                (1, 0) => -0.2,
                _ => 0.0,
            };
            assert!((amps[i] - c(3.0, 0.0) * Complex64::cis(expect)).norm() < 1e-12);
        }
    }

    #[test]
    fn balanced_input_projects_onto_bell_pairs() {
        let (s, a, b) = two_qubits([c(0.5, 0.0); 4]);
        let gate = ParityGate::new(ideal()).unwrap();
        let prep = gate.prepare(&s, a, b).unwrap();
        let d = prep.count_distribution().unwrap();
        assert!((d[0] - 0.5).abs() < 1e-12);
        let (out, even) = prep.condition(OutcomeValue::PhotonCount(0)).unwrap();
        assert_eq!(out.parity, Parity::Even);
        let f = even.fidelity(&target(&even, [c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)])).unwrap();
        assert!(f > 1.0 - 1e-12, "{f}");
        for n in [3, 10, 17] {
            let (out, odd) = prep.condition(OutcomeValue::PhotonCount(n)).unwrap();
            assert_eq!(out.parity, Parity::Odd);
            let t = target(&odd, [c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0)]);
            assert!(odd.fidelity(&t).unwrap() > 1.0 - 1e-10);
        }
    }

    #[test]
    fn diagonal_basis_distinguishes_phi_minus() {
        let h = FRAC_1_SQRT_2;
        let (s, a, b) = two_qubits([c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)]);
        let gate = ParityGate::new(ideal().with_basis(QubitBasis::Diagonal)).unwrap();
        let prep = gate.prepare(&s, a, b).unwrap();
        assert!(prep.count_distribution().unwrap()[0] < 1e-15);
        let (out, post) = prep.condition(prep.representative(Parity::Odd).unwrap()).unwrap();
        assert_eq!(out.parity, Parity::Odd);
        let t = target(&post, [c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)]);
        assert!(post.fidelity(&t).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn homodyne_option_restores_odd_state() {
        let (s, a, b) = two_qubits([c(0.1, 0.0), c(0.6, 0.2), c(0.3, -0.5), c(0.4, 0.0)]);
        let cfg = ParityGateConfig::new(40.0, 0.5).with_measurement(ParityMeasurement::HomodyneX0);
        let prep = ParityGate::new(cfg).unwrap().prepare(&s, a, b).unwrap();
        let peak = cfg.odd_homodyne_peak();
        for x in [peak - 0.7, peak, peak + 1.3] {
            let (out, post) = prep.condition(OutcomeValue::Quadrature(x)).unwrap();
            assert_eq!(out.parity, Parity::Odd);
            let t = target(&post, [c(0.0, 0.0), c(0.6, 0.2), c(0.3, -0.5), c(0.0, 0.0)]);
            assert!(post.fidelity(&t).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn undo_restores_uncorrected_state() {
        let (s, a, b) = two_qubits([c(0.1, 0.3), c(0.6, 0.2), c(0.3, -0.5), c(0.4, 0.0)]);
        let prep = ParityGate::new(ideal()).unwrap().prepare(&s, a, b).unwrap();
        let (raw, _) = measure::condition_on_photon_number(prep.displaced(), prep.bus(), 9).unwrap();
        let (out, mut post) = prep.condition(OutcomeValue::PhotonCount(9)).unwrap();
        out.corrections.undo(&mut post).unwrap();
        assert!(post.fidelity(&raw).unwrap() > 1.0 - 1e-12);
        assert!((post.inner_product(&raw).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn repeated_gate_keeps_parity() {
        let (s, a, b) = two_qubits([c(0.5, 0.1), c(0.5, 0.0), c(-0.5, 0.0), c(0.4, 0.2)]);
        let gate = ParityGate::new(ideal()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (first, post) = gate.run(&s, a, b, &mut rng).unwrap();
            let (second, _) = gate.run(&post, a, b, &mut rng).unwrap();
            assert_eq!(first.parity, second.parity);
        }
    }

    #[test]
    fn config_checks() {
        assert!(ParityGate::new(ParityGateConfig::new(-1.0, 0.1)).is_err());
        assert!(ParityGate::new(ParityGateConfig::new(1.0, 0.1).with_eta(1.5)).is_err());
        assert!(ParityGateConfig::new(1.0, 0.1).degraded());
        assert!(!ideal().degraded());
        let (s, a, _) = two_qubits([c(0.5, 0.0); 4]);
        assert!(matches!(ParityGate::new(ideal()).unwrap().entangle(&s, a, a), Err(Error::SameQubit)));
        let m = ErrorModelParams { eta_per_link: vec![0.1, 0.2], alpha: Some(10.0), theta: None };
        let cfg = m.config_for_link(&ideal(), 1).unwrap();
        assert_eq!((cfg.eta, cfg.alpha), (0.2, 10.0));
        assert_eq!(m.config_for_link(&ideal(), 5).unwrap().eta, 0.0);
    }
}
