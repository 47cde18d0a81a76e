//! Graph-state bookkeeping and parity-gate fusion.
//!
//! A node of the graph may be carried by several qubits in the redundant
//! encoding `|0…0⟩`, `|1…1⟩` left behind by an even fusion. Its logical X
//! acts on all of them, its logical Z on the first.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use super::parity::{ParityGate, ParityGateConfig, ParityOutcome};
use super::{CorrectionReason, FeedForwardRecord, Parity};
use crate::analytics::{pauli_expectation, Pauli};
use crate::branch::{CoherentBranchState, DiscreteId};
use crate::error::{Error, Result};
use crate::measure::QubitBasis;
use crate::unitary;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Node {
    qubits: Vec<DiscreteId>,
    neighbours: BTreeSet<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cluster {
    nodes: BTreeMap<usize, Node>,
    next: usize,
}

impl Cluster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append `n` qubits in `|+⟩` joined by controlled-Z into a chain.
    pub fn linear(state: &mut CoherentBranchState, n: usize) -> Result<Self> {
        let mut c = Self::new();
        let plus = [Complex64::new(FRAC_1_SQRT_2, 0.0); 2];
        let mut prev: Option<(usize, DiscreteId)> = None;
        for _ in 0..n {
            let q = state.add_qubit(plus)?;
            let id = c.add_node(q);
            if let Some((p, pq)) = prev {
                state.controlled_z(pq, q)?;
                c.link(p, id);
            }
            prev = Some((id, q));
        }
        Ok(c)
    }

    fn add_node(&mut self, q: DiscreteId) -> usize {
        let id = self.next;
        self.next += 1;
        self.nodes.insert(id, Node { qubits: vec![q], neighbours: BTreeSet::new() });
        id
    }

    fn link(&mut self, u: usize, v: usize) {
        self.nodes.get_mut(&u).expect("node").neighbours.insert(v);
        self.nodes.get_mut(&v).expect("node").neighbours.insert(u);
    }

    /// Disjoint union with another fragment living in the same state.
    pub fn union(mut self, other: Cluster) -> Self {
        let offset = self.next;
        for (id, node) in other.nodes {
            let neighbours = node.neighbours.iter().map(|n| n + offset).collect();
            self.nodes.insert(id + offset, Node { qubits: node.qubits, neighbours });
        }
        self.next += other.next;
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn qubit_count(&self) -> usize {
        self.nodes.values().map(|n| n.qubits.len()).sum()
    }

    /// All qubits, node by node.
    pub fn qubits(&self) -> Vec<DiscreteId> {
        self.nodes.values().flat_map(|n| n.qubits.iter().copied()).collect()
    }

    pub fn node_of(&self, q: DiscreteId) -> Option<usize> {
        self.nodes.iter().find(|(_, n)| n.qubits.contains(&q)).map(|(&id, _)| id)
    }

    pub fn node_qubits(&self, node: usize) -> Option<&[DiscreteId]> {
        self.nodes.get(&node).map(|n| n.qubits.as_slice())
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for (&u, n) in &self.nodes {
            for &v in &n.neighbours {
                if u < v {
                    e.push((u, v));
                }
            }
        }
        e
    }

    pub fn degree(&self, node: usize) -> usize {
        self.nodes.get(&node).map_or(0, |n| n.neighbours.len())
    }

    fn representative(&self, node: usize) -> DiscreteId {
        self.nodes[&node].qubits[0]
    }

    /// Generators of the stabilizer group: `Z Z` between consecutive
    /// qubits of a node, and `X` on a node times `Z` on its neighbours.
    pub fn stabilizers(&self) -> Vec<Vec<(DiscreteId, Pauli)>> {
        let mut out = Vec::new();
        for node in self.nodes.values() {
            for w in node.qubits.windows(2) {
                out.push(vec![(w[0], Pauli::Z), (w[1], Pauli::Z)]);
            }
            let mut g: Vec<(DiscreteId, Pauli)> = node.qubits.iter().map(|&q| (q, Pauli::X)).collect();
            for &n in &node.neighbours {
                g.push((self.representative(n), Pauli::Z));
            }
            out.push(g);
        }
        out
    }

    fn merge_nodes(&mut self, keep: usize, drop: usize) {
        let gone = self.nodes.remove(&drop).expect("node");
        for &n in &gone.neighbours {
            let nb = self.nodes.get_mut(&n).expect("node");
            nb.neighbours.remove(&drop);
            if !nb.neighbours.remove(&keep) {
                nb.neighbours.insert(keep);
            }
        }
        let k = self.nodes.get_mut(&keep).expect("node");
        k.qubits.extend(gone.qubits);
        let sym: BTreeSet<usize> = k.neighbours.symmetric_difference(&gone.neighbours).copied().collect();
        k.neighbours = sym;
    }
}

#[derive(Clone, Debug)]
pub struct FusionResult {
    pub outcome: ParityOutcome,
    pub fused: bool,
    /// Parity-gate corrections followed by the graph-state corrections.
    pub corrections: FeedForwardRecord,
}

/// Parity-gate fusion of the nodes holding qubits `a` and `b`. On an even
/// result the two nodes merge; on odd the second node is flipped and its
/// neighbours sign-corrected first. An indeterminate result leaves the
/// graph as it was.
pub fn fuse_clusters<R: Rng + ?Sized>(
    state: &mut CoherentBranchState,
    cluster: &mut Cluster,
    a: DiscreteId,
    b: DiscreteId,
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<FusionResult> {
    let na = cluster.node_of(a).ok_or(Error::UnknownDiscreteMode(a.index()))?;
    let nb = cluster.node_of(b).ok_or(Error::UnknownDiscreteMode(b.index()))?;
    if na == nb || cluster.nodes[&na].neighbours.contains(&nb) {
        return Err(Error::InvalidParameter {
            name: "qubits",
            reason: "fusion needs two distinct, non-adjacent nodes".into(),
        });
    }
    let gate = ParityGate::new(config.with_basis(QubitBasis::Computational))?;
    let (outcome, mut s) = gate.run(state, a, b, rng)?;
    let mut corrections = outcome.corrections.clone();
    match outcome.parity {
        Parity::Indeterminate => {
            *state = s;
            return Ok(FusionResult { outcome, fused: false, corrections });
        }
        Parity::Odd => {
            for &q in &cluster.nodes[&nb].qubits {
                corrections.apply(&mut s, q, unitary::pauli_x(), CorrectionReason::BitFlip)?;
            }
            let nbrs: Vec<usize> = cluster.nodes[&nb].neighbours.iter().copied().collect();
            for n in nbrs {
                corrections.apply(&mut s, cluster.representative(n), unitary::pauli_z(), CorrectionReason::SignFlip)?;
            }
        }
        Parity::Even => {}
    }
    cluster.merge_nodes(na, nb);
    *state = s;
    Ok(FusionResult { outcome, fused: true, corrections })
}

/// Add one leaf to the node holding `at`: fuse a fresh `|+⟩` onto it and
/// rotate the new qubit out of the redundant encoding.
pub fn grow_cluster<R: Rng + ?Sized>(
    state: &mut CoherentBranchState,
    cluster: &mut Cluster,
    at: DiscreteId,
    config: &ParityGateConfig,
    rng: &mut R,
) -> Result<(DiscreteId, FusionResult)> {
    let host = cluster.node_of(at).ok_or(Error::UnknownDiscreteMode(at.index()))?;
    let fresh = state.add_qubit([Complex64::new(FRAC_1_SQRT_2, 0.0); 2])?;
    let leaf = cluster.add_node(fresh);
    let result = fuse_clusters(state, cluster, at, fresh, config, rng)?;
    if result.fused {
        state.apply_register_unitary(fresh, &unitary::hadamard())?;
        let h = cluster.nodes.get_mut(&host).expect("node");
        h.qubits.retain(|&q| q != fresh);
        cluster.nodes.insert(leaf, Node { qubits: vec![fresh], neighbours: BTreeSet::new() });
        cluster.link(host, leaf);
    }
    Ok((fresh, result))
}

/// Expectation of every stabilizer generator of the cluster.
pub fn stabilizer_expectations(state: &CoherentBranchState, cluster: &Cluster) -> Result<Vec<f64>> {
    let qubits = cluster.qubits();
    let rho = state.reduced_density_matrix(&qubits)?;
    cluster
        .stabilizers()
        .iter()
        .map(|g| {
            let mut ops = vec![Pauli::I; qubits.len()];
            for &(q, p) in g {
                let i = qubits.iter().position(|&x| x == q).ok_or(Error::UnknownDiscreteMode(q.index()))?;
                ops[i] = p;
            }
            pauli_expectation(&rho, &ops)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::f64::consts::PI;

    fn ideal() -> ParityGateConfig {
        ParityGateConfig::new(2.0 * PI / 0.01f64.sin(), 0.01)
    }

    #[test]
    fn linear_cluster_is_stabilized() {
        let mut s = CoherentBranchState::new();
        let c = Cluster::linear(&mut s, 4).unwrap();
        assert_eq!(c.edges().len(), 3);
        for v in stabilizer_expectations(&s, &c).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fusing_two_pairs_both_outcomes() {
        let mut seen = [false; 2];
        for seed in 0..12 {
            let mut s = CoherentBranchState::new();
            let c1 = Cluster::linear(&mut s, 2).unwrap();
            let c2 = Cluster::linear(&mut s, 2).unwrap();
            let q = c1.qubits().into_iter().chain(c2.qubits()).collect::<Vec<_>>();
            let mut c = c1.union(c2);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let r = fuse_clusters(&mut s, &mut c, q[1], q[2], &ideal(), &mut rng).unwrap();
            assert!(r.fused);
            seen[r.outcome.parity.bit().unwrap() as usize] = true;
            assert_eq!(c.node_count(), 3);
            assert_eq!(c.qubit_count(), 4);
            for v in stabilizer_expectations(&s, &c).unwrap() {
                assert!((v - 1.0).abs() < 1e-8, "{v}");
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn growth_adds_one_leaf() {
        let mut s = CoherentBranchState::new();
        let mut c = Cluster::linear(&mut s, 2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut end = c.qubits()[1];
        for k in 0..3 {
            let (fresh, r) = grow_cluster(&mut s, &mut c, end, &ideal(), &mut rng).unwrap();
            assert!(r.fused);
            assert_eq!(c.node_count(), 3 + k);
            assert_eq!(c.qubit_count(), 3 + k);
            end = fresh;
        }
        assert_eq!(c.edges().len(), 4);
        for v in stabilizer_expectations(&s, &c).unwrap() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn adjacent_nodes_rejected() {
        let mut s = CoherentBranchState::new();
        let mut c = Cluster::linear(&mut s, 2).unwrap();
        let q = c.qubits();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(fuse_clusters(&mut s, &mut c, q[0], q[1], &ideal(), &mut rng).is_err());
    }
}
