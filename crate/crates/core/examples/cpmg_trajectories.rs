//! Monte Carlo of the pulse sequence with slow phase noise, with and without
//! the closing echo block.

use uncollapse::gates::Axis;
use uncollapse::trajectory::{
    build_fig2_sequence, herald_conditioned_state, InputState, NoiseModel, SequenceOptions,
};
use uncollapse::{fidelity, Result};

fn main() -> Result<()> {
    let noise = NoiseModel::gaussian(0.6)?;
    let truth = InputState::PlusX.pure_state().density_matrix();
    for cpmg in [true, false] {
        let opts = SequenceOptions { cpmg, ..Default::default() };
        let seq = build_fig2_sequence(InputState::PlusX, 0.5, 0.0, Axis::X, &opts)?;
        let (rho, stats) = herald_conditioned_state(&seq, &noise, 20_000, 11)?;
        println!(
            "cpmg={cpmg}: acceptance {:.4}, fidelity {:.4}",
            stats.acceptance_fraction(),
            fidelity(&truth, &rho)?
        );
    }
    Ok(())
}
