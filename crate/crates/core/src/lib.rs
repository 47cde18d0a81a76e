//! Weak cross-Kerr quantum information processing on coherent buses.
//!
//! States are kept exactly as superpositions of register values times
//! coherent states ([`branch::CoherentBranchState`]), which stays valid at
//! probe amplitudes far beyond anything a truncated Fock space can hold.
//! [`oracle::FockState`] re-implements the primitives in a truncated Fock
//! space for cross-checking at small amplitude.

pub mod analytics;
pub mod branch;
pub mod error;
pub mod measure;
pub mod oracle;
pub mod protocols;
pub mod runner;
pub mod unitary;

pub use branch::{BusId, CoherentBranchState, ComplexAmp, DiscreteId, DiscreteKind};
pub use error::{Error, Result};
