//! Splitting a leak interval into many short recoveries.

use uncollapse::experiment::{repeated_recovery, repeated_recovery_mc};
use uncollapse::trajectory::InputState;
use uncollapse::Result;

fn main() -> Result<()> {
    for n in [1, 10, 100] {
        let r = repeated_recovery(1.0, n)?;
        let (mc, sigma) = repeated_recovery_mc(1.0, n, InputState::PlusX, 20_000, 5)?;
        println!(
            "n={n}: p_seg {:.5}, success {:.6} (MC {mc:.4} +- {sigma:.4}), limit {:.6}",
            r.p_segment, r.success_prob, r.asymptote
        );
    }
    Ok(())
}
