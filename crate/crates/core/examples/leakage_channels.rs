//! Leakage channel, branching channel and the partial-collapse instrument on |+x>.

use uncollapse::{apply_cp, apply_dp, partial_measure_mp, PureState, Result};

fn main() -> Result<()> {
    let plus = PureState::plus_x().density_matrix();
    for p in [0.2, 0.5, 0.8] {
        let leaked = apply_cp(&plus.embed_with_leakage()?, p)?;
        let branched = apply_dp(&plus.embed_with_leakage()?, p, 0.0355)?;
        let m = partial_measure_mp(&plus, p)?;
        println!(
            "p={p}: leaked pop {:.3}, branched |0> pop {:.3}, M_p success {:.3}, bloch {:?}",
            leaked.population(2),
            branched.population(0),
            m.success_prob,
            m.state.bloch_vector()?.components()
        );
    }
    Ok(())
}
