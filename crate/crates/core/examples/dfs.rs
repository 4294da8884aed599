//! Two-qubit encoding a|01> + b|10> under independent leakage on each qubit.

use num_complex::Complex64;
use uncollapse::experiment::dfs_two_qubit;
use uncollapse::Result;

fn main() -> Result<()> {
    let a = Complex64::new(0.6, 0.0);
    let b = Complex64::new(0.0, 0.8);
    for p in [0.1, 0.5, 0.9] {
        let r = dfs_two_qubit(p, a, b)?;
        println!("p={p}: post-selected fidelity {:.12}, survival {:.6}", r.fidelity, r.survival);
    }
    Ok(())
}
