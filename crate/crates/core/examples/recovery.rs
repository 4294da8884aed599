//! Ideal and imperfect recovery of a random state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uncollapse::random_states::random_qubit_state;
use uncollapse::{fidelity, recover_rp, recover_rp_prime, Result};

fn main() -> Result<()> {
    let rho = random_qubit_state(&mut ChaCha8Rng::seed_from_u64(3));
    println!("input bloch {:?}", rho.bloch_vector()?.components());
    for p in [0.3, 0.7, 0.95] {
        let ideal = recover_rp(&rho, p)?;
        let real = recover_rp_prime(&rho, p, 0.0355)?;
        println!(
            "p={p}: ideal distance {:.1e} success {:.3}; with branching F={:.5} success {:.3}",
            ideal.state.trace_distance(&rho)?,
            ideal.success_prob,
            fidelity(&rho, &real.state)?,
            real.success_prob
        );
    }
    Ok(())
}
