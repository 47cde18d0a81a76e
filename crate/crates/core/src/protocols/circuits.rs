//! Bell pairs, the parity-gate CNOT and the non-destructive Bell measurement.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::parity::{ParityGate, ParityGateConfig, ParityOutcome};
use super::{CorrectionReason, FeedForwardRecord, Parity};
use crate::analytics::{self, Pauli};
use crate::branch::{CoherentBranchState, DiscreteId};
use crate::error::{Error, Result};
use crate::measure::{self, QubitBasis};
use crate::unitary;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn diagonal_plus() -> [Complex64; 2] {
    [Complex64::new(FRAC_1_SQRT_2, 0.0); 2]
}

/// What to do at a measurement step.
#[derive(Clone, Copy, Debug)]
enum Step {
    Sample,
    Parity(Parity),
    Bit(u16),
}

fn gate_step<R: Rng + ?Sized>(
    gate: &ParityGate,
    state: &CoherentBranchState,
    a: DiscreteId,
    b: DiscreteId,
    step: Step,
    rng: &mut R,
) -> Result<(ParityOutcome, CoherentBranchState)> {
    let prep = gate.prepare(state, a, b)?;
    let value = match step {
        Step::Parity(p) => prep.representative(p)?,
        _ => prep.sample_value(rng),
    };
    prep.condition(value)
}

fn qubit_step<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    q: DiscreteId,
    basis: QubitBasis,
    step: Step,
    rng: &mut R,
) -> Result<(u16, CoherentBranchState)> {
    match step {
        Step::Bit(bit) => {
            let (s, _) = measure::project_qubit(state, q, basis, bit)?;
            Ok((bit, s))
        }
        _ => {
            let (bit, s, _) = measure::measure_qubit(state, q, basis, rng)?;
            Ok((bit, s))
        }
    }
}

fn bell_pair_step<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    config: &ParityGateConfig,
    step: Step,
    rng: &mut R,
) -> Result<(CoherentBranchState, [DiscreteId; 2], ParityOutcome)> {
    let gate = ParityGate::new(config.with_basis(QubitBasis::Computational))?;
    let mut s = state.clone();
    let a = s.add_qubit(diagonal_plus())?;
    let b = s.add_qubit(diagonal_plus())?;
    let (mut outcome, mut s) = gate_step(&gate, &s, a, b, step, rng)?;
    if outcome.parity == Parity::Odd {
        outcome.corrections.apply(&mut s, b, unitary::pauli_x(), CorrectionReason::BitFlip)?;
    }
    Ok((s, [a, b], outcome))
}

/// Two fresh `|D⟩` qubits through the parity gate; an odd result is
/// flipped so both outcomes give `(|HH⟩+|VV⟩)/√2`.
pub fn make_bell_pair<R: Rng + ?Sized>(
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<(CoherentBranchState, [DiscreteId; 2], ParityOutcome)> {
    make_bell_pair_in(&CoherentBranchState::new(), config, rng)
}

/// As [`make_bell_pair`], appending the pair to an existing state.
pub fn make_bell_pair_in<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<(CoherentBranchState, [DiscreteId; 2], ParityOutcome)> {
    bell_pair_step(state, config, Step::Sample, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CnotOutcomes {
    pub bell: Parity,
    /// Parity of (control, a) in the H/V basis.
    pub first: Parity,
    /// Ancilla `a` in the D basis: 0 for D, 1 for D̄.
    pub ancilla_a: u16,
    /// Parity of (target, b) in the D basis.
    pub second: Parity,
    /// Ancilla `b` in the H/V basis.
    pub ancilla_b: u16,
}

impl CnotOutcomes {
    /// The 16 combinations of the gate-level outcomes with an even Bell pair.
    pub fn all() -> Vec<CnotOutcomes> {
        let par = [Parity::Even, Parity::Odd];
        let mut v = Vec::with_capacity(16);
        for first in par {
            for ancilla_a in 0..2 {
                for second in par {
                    for ancilla_b in 0..2 {
                        v.push(CnotOutcomes { bell: Parity::Even, first, ancilla_a, second, ancilla_b });
                    }
                }
            }
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct CnotRun {
    pub state: CoherentBranchState,
    pub outcomes: CnotOutcomes,
    pub corrections: FeedForwardRecord,
    /// Set when a parity gate came back indeterminate; the state is
    /// returned as it stood at that point.
    pub failed: bool,
    pub degraded: bool,
}

fn cnot_impl<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    control: DiscreteId,
    target: DiscreteId,
    configs: &[ParityGateConfig; 3],
    forced: Option<CnotOutcomes>,
    apply_table: bool,
    rng: &mut R,
) -> Result<CnotRun> {
    if control == target {
        return Err(Error::SameQubit);
    }
    let pick_parity = |f: fn(&CnotOutcomes) -> Parity| forced.map_or(Step::Sample, |o| Step::Parity(f(&o)));
    let pick_bit = |f: fn(&CnotOutcomes) -> u16| forced.map_or(Step::Sample, |o| Step::Bit(f(&o)));
    let mut outcomes = CnotOutcomes {
        bell: Parity::Indeterminate,
        first: Parity::Indeterminate,
        ancilla_a: 0,
        second: Parity::Indeterminate,
        ancilla_b: 0,
    };
    let mut corrections = FeedForwardRecord::default();
    let degraded = configs.iter().any(|c| c.degraded());
    let fail = |state, outcomes, corrections| Ok(CnotRun { state, outcomes, corrections, failed: true, degraded });

    let (s, [a, b], bell) = bell_pair_step(state, &configs[0], pick_parity(|o| o.bell), rng)?;
    outcomes.bell = bell.parity;
    corrections.extend(bell.corrections);
    if bell.parity == Parity::Indeterminate {
        return fail(s, outcomes, corrections);
    }

    let g1 = ParityGate::new(configs[1].with_basis(QubitBasis::Computational))?;
    let (first, mut s) = gate_step(&g1, &s, control, a, pick_parity(|o| o.first), rng)?;
    outcomes.first = first.parity;
    corrections.extend(first.corrections);
    if first.parity == Parity::Indeterminate {
        return fail(s, outcomes, corrections);
    }
    if apply_table && first.parity == Parity::Odd {
        corrections.apply(&mut s, b, unitary::pauli_x(), CorrectionReason::BitFlip)?;
    }

    let (bit_a, mut s) = qubit_step(&s, a, QubitBasis::Diagonal, pick_bit(|o| o.ancilla_a), rng)?;
    outcomes.ancilla_a = bit_a;
    if apply_table && bit_a == 1 {
        corrections.apply(&mut s, b, unitary::pauli_z(), CorrectionReason::SignFlip)?;
    }

    let g2 = ParityGate::new(configs[2].with_basis(QubitBasis::Diagonal))?;
    let (second, mut s) = gate_step(&g2, &s, target, b, pick_parity(|o| o.second), rng)?;
    outcomes.second = second.parity;
    corrections.extend(second.corrections);
    if second.parity == Parity::Indeterminate {
        return fail(s, outcomes, corrections);
    }
    if apply_table && second.parity == Parity::Odd {
        corrections.apply(&mut s, control, unitary::pauli_z(), CorrectionReason::SignFlip)?;
    }

    let (bit_b, mut s) = qubit_step(&s, b, QubitBasis::Computational, pick_bit(|o| o.ancilla_b), rng)?;
    outcomes.ancilla_b = bit_b;
    if apply_table && bit_b == 1 {
        corrections.apply(&mut s, target, unitary::pauli_x(), CorrectionReason::BitFlip)?;
    }
    Ok(CnotRun { state: s, outcomes, corrections, failed: false, degraded })
}

/// CNOT from a Bell pair, two parity gates and two ancilla measurements,
/// with the feed-forward table applied.
pub fn cnot<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    control: DiscreteId,
    target: DiscreteId,
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<CnotRun> {
    cnot_impl(state, control, target, &[*config; 3], None, true, rng)
}

/// As [`cnot`] with separate configurations for the Bell-pair gate and the
/// two entangling gates.
pub fn cnot_with_configs<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    control: DiscreteId,
    target: DiscreteId,
    configs: &[ParityGateConfig; 3],
    rng: &mut R,
) -> Result<CnotRun> {
    cnot_impl(state, control, target, configs, None, true, rng)
}

/// The circuit with every measurement forced to the given outcome.
pub fn cnot_forced(
    state: &CoherentBranchState,
    control: DiscreteId,
    target: DiscreteId,
    config: &ParityGateConfig,
    outcomes: CnotOutcomes,
) -> Result<CnotRun> {
    cnot_impl(state, control, target, &[*config; 3], Some(outcomes), true, &mut ChaCha20Rng::seed_from_u64(0))
}

/// `CNOT` on a two-qubit vector, control first.
pub fn cnot_target(amps: [Complex64; 4]) -> [Complex64; 4] {
    [amps[0], amps[1], amps[3], amps[2]]
}

#[derive(Clone, Debug)]
pub struct CnotEnumerationRow {
    pub outcomes: CnotOutcomes,
    /// Fidelity of the corrected output with the ideal CNOT output.
    pub table_fidelity: f64,
    /// Local Pauli pairs (control, target) that turn the uncorrected output
    /// into the ideal one.
    pub solutions: Vec<[Pauli; 2]>,
}

impl CnotEnumerationRow {
    pub fn passes(&self, tol: f64) -> bool {
        self.table_fidelity >= 1.0 - tol && self.solutions.len() == 1
    }
}

fn pauli_matrix(p: Pauli) -> nalgebra::Matrix2<Complex64> {
    match p {
        Pauli::I => unitary::identity(),
        Pauli::X => unitary::pauli_x(),
        Pauli::Y => unitary::pauli_y(),
        Pauli::Z => unitary::pauli_z(),
    }
}

/// Runs all 16 outcome combinations on `input` (control most significant),
/// once with the frozen correction table and once without, and solves for
/// the local Pauli corrections that the uncorrected output needs.
pub fn cnot_enumeration(config: &ParityGateConfig, input: [Complex64; 4], tol: f64) -> Result<Vec<CnotEnumerationRow>> {
    let mut s = CoherentBranchState::new();
    let q = s.add_qubits(2, &input)?;
    s.normalize()?;
    let norm: f64 = input.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ideal = cnot_target(input.map(|z| z / norm));
    let mut rows = Vec::with_capacity(16);
    let paulis = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    for outcomes in CnotOutcomes::all() {
        let table = cnot_impl(&s, q[0], q[1], &[*config; 3], Some(outcomes), true, &mut ChaCha20Rng::seed_from_u64(0))?;
        let table_fidelity = analytics::fidelity(&table.state.reduced_density_matrix(&q)?, &ideal)?;
        let raw = cnot_impl(&s, q[0], q[1], &[*config; 3], Some(outcomes), false, &mut ChaCha20Rng::seed_from_u64(0))?;
        let mut solutions = Vec::new();
        for pc in paulis {
            for pt in paulis {
                let mut fixed = raw.state.clone();
                fixed.apply_register_unitary(q[0], &pauli_matrix(pc))?;
                fixed.apply_register_unitary(q[1], &pauli_matrix(pt))?;
                let f = analytics::fidelity(&fixed.reduced_density_matrix(&q)?, &ideal)?;
                if f >= 1.0 - tol {
                    solutions.push([pc, pt]);
                }
            }
        }
        rows.push(CnotEnumerationRow { outcomes, table_fidelity, solutions });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BellIndex {
    /// (|HH⟩+|VV⟩)/√2
    PhiPlus,
    /// (|HH⟩−|VV⟩)/√2
    PhiMinus,
    /// (|HV⟩+|VH⟩)/√2
    PsiPlus,
    /// (|HV⟩−|VH⟩)/√2
    PsiMinus,
}

impl BellIndex {
    pub const ALL: [BellIndex; 4] = [BellIndex::PhiPlus, BellIndex::PhiMinus, BellIndex::PsiPlus, BellIndex::PsiMinus];

    /// From the H/V parity and the D/D̄ parity.
    pub fn from_parities(first: Parity, second: Parity) -> Option<Self> {
        match (first, second) {
            (Parity::Even, Parity::Even) => Some(BellIndex::PhiPlus),
            (Parity::Even, Parity::Odd) => Some(BellIndex::PhiMinus),
            (Parity::Odd, Parity::Even) => Some(BellIndex::PsiPlus),
            (Parity::Odd, Parity::Odd) => Some(BellIndex::PsiMinus),
            _ => None,
        }
    }

    pub fn amplitudes(self) -> [Complex64; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            BellIndex::PhiPlus => [h, ZERO, ZERO, h],
            BellIndex::PhiMinus => [h, ZERO, ZERO, -h],
            BellIndex::PsiPlus => [ZERO, h, h, ZERO],
            BellIndex::PsiMinus => [ZERO, h, -h, ZERO],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellIndex::PhiPlus => "phi+",
            BellIndex::PhiMinus => "phi-",
            BellIndex::PsiPlus => "psi+",
            BellIndex::PsiMinus => "psi-",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BellMeasurement {
    /// `None` when either gate was indeterminate.
    pub index: Option<BellIndex>,
    pub first: ParityOutcome,
    pub second: Option<ParityOutcome>,
    pub state: CoherentBranchState,
}

/// H/V parity followed by D/D̄ parity. The qubits survive in the
/// identified Bell state.
pub fn bell_measurement<R: Rng + ?Sized>(
    state: &CoherentBranchState,
    a: DiscreteId,
    b: DiscreteId,
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<BellMeasurement> {
    let g1 = ParityGate::new(config.with_basis(QubitBasis::Computational))?;
    let (first, s) = g1.run(state, a, b, rng)?;
    if first.parity == Parity::Indeterminate {
        return Ok(BellMeasurement { index: None, first, second: None, state: s });
    }
    let g2 = ParityGate::new(config.with_basis(QubitBasis::Diagonal))?;
    let (second, s) = g2.run(&s, a, b, rng)?;
    let index = BellIndex::from_parities(first.parity, second.parity);
    Ok(BellMeasurement { index, first, second: Some(second), state: s })
}
