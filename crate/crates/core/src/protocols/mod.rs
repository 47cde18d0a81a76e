//! Gates and protocols assembled from the branch primitives.

mod circuits;
mod cluster;
mod detector;
mod parity;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::branch::{CoherentBranchState, DiscreteId};
use crate::error::Result;

pub use circuits::{
    bell_measurement, cnot, cnot_enumeration, cnot_forced, cnot_target, cnot_with_configs, make_bell_pair,
    make_bell_pair_in, BellIndex, BellMeasurement, CnotEnumerationRow, CnotOutcomes, CnotRun,
};
pub use cluster::{fuse_clusters, grow_cluster, stabilizer_expectations, Cluster, FusionResult};
pub use detector::{
    prepare_heralded_photon, qnd_photon_detect, source_amplitudes, HeraldOutcome, HeraldedSource, QndDetector,
    QndOutcome,
};
pub use parity::{
    parity_gate, Entangled, ErrorModelParams, LossPlacement, ParityGate, ParityGateConfig, ParityMeasurement,
    ParityOutcome, PreparedParity,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    Indeterminate,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::Indeterminate => "indeterminate",
        }
    }

    pub fn bit(self) -> Option<u16> {
        match self {
            Parity::Even => Some(0),
            Parity::Odd => Some(1),
            Parity::Indeterminate => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrectionReason {
    PhiCorrection,
    StaticDisplacementPhase,
    LossyPhaseCorrection,
    BitFlip,
    SignFlip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correction {
    pub target: DiscreteId,
    pub unitary: Matrix2<Complex64>,
    pub reason: CorrectionReason,
}

/// Corrections in the order they were applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeedForwardRecord {
    pub corrections: Vec<Correction>,
}

impl FeedForwardRecord {
    pub fn push(&mut self, target: DiscreteId, unitary: Matrix2<Complex64>, reason: CorrectionReason) {
        self.corrections.push(Correction { target, unitary, reason });
    }

    pub fn extend(&mut self, other: FeedForwardRecord) {
        self.corrections.extend(other.corrections);
    }

    pub fn len(&self) -> usize {
        self.corrections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrections.is_empty()
    }

    pub fn count(&self, reason: CorrectionReason) -> usize {
        self.corrections.iter().filter(|c| c.reason == reason).count()
    }

    /// Apply a correction and record it.
    pub fn apply(
        &mut self,
        state: &mut CoherentBranchState,
        target: DiscreteId,
        unitary: Matrix2<Complex64>,
        reason: CorrectionReason,
    ) -> Result<()> {
        state.apply_register_unitary(target, &unitary)?;
        self.push(target, unitary, reason);
        Ok(())
    }

    /// Apply the inverses in reverse order.
    pub fn undo(&self, state: &mut CoherentBranchState) -> Result<()> {
        for c in self.corrections.iter().rev() {
            state.apply_register_unitary(c.target, &c.unitary.adjoint())?;
        }
        Ok(())
    }
}
