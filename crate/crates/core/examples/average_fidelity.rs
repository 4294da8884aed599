//! Bloch-sphere averaged fidelity of the single projection and of the recovery.

use uncollapse::experiment::{average_fidelity_converged, Protocol, Weighting};
use uncollapse::Result;

fn main() -> Result<()> {
    for p in [0.2, 0.5, 0.8] {
        let m = average_fidelity_converged(p, Protocol::M, 0.0, Weighting::Heralded, 10_000)?;
        let r = average_fidelity_converged(p, Protocol::Rprime, 0.0355, Weighting::Heralded, 10_000)?;
        println!("p={p}: M {:.4} ({} nodes), R' {:.4} ({} nodes)", m.value, m.nodes, r.value, r.nodes);
    }
    Ok(())
}
