//! Parity-gate fusion of two cluster fragments, then growth of a chain by
//! repeated fusion with fresh qubits.

use std::f64::consts::PI;

use kerrbus::protocols::{fuse_clusters, grow_cluster, stabilizer_expectations, Cluster, ParityGateConfig};
use kerrbus::CoherentBranchState;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> kerrbus::Result<()> {
    let theta: f64 = 0.01;
    let config = ParityGateConfig::new(2.0 * PI / theta.sin(), theta);
    let mut rng = ChaCha20Rng::seed_from_u64(2);

    let mut s = CoherentBranchState::new();
    let left = Cluster::linear(&mut s, 2)?;
    let right = Cluster::linear(&mut s, 2)?;
    let q: Vec<_> = left.qubits().into_iter().chain(right.qubits()).collect();
    let mut cluster = left.union(right);
    let r = fuse_clusters(&mut s, &mut cluster, q[1], q[2], &config, &mut rng)?;
    println!("fusion {}: {} nodes, edges {:?}", r.outcome.parity.as_str(), cluster.node_count(), cluster.edges());
    println!("stabilizers {:?}", stabilizer_expectations(&s, &cluster)?);

    let mut s = CoherentBranchState::new();
    let mut chain = Cluster::linear(&mut s, 2)?;
    let mut end = chain.qubits()[1];
    for _ in 0..3 {
        let (fresh, r) = grow_cluster(&mut s, &mut chain, end, &config, &mut rng)?;
        println!("grew by one ({}), {} nodes", r.outcome.parity.as_str(), chain.node_count());
        end = fresh;
    }
    let worst = stabilizer_expectations(&s, &chain)?.into_iter().fold(f64::INFINITY, f64::min);
    println!("chain edges {:?}, smallest stabilizer {worst:.12}", chain.edges());
    Ok(())
}
