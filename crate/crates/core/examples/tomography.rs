//! Simulated state tomography and process tomography of the ideal recovery.

use uncollapse::rng::stream;
use uncollapse::tomography::{
    estimate_bloch, fidelity_with_errorbars, reconstruct_process, simulate_tomography,
};
use uncollapse::{recover_rp, PureState, Result};

fn main() -> Result<()> {
    let truth = PureState::plus_y().density_matrix();
    let records = simulate_tomography(&truth, 12_000, &mut stream(1, 0))?;
    for r in &records {
        println!("{}: {}/{}", r.axis().label(), r.n_up(), r.n_total());
    }
    println!("estimate {:?}", estimate_bloch(&records)?.components());
    let f = fidelity_with_errorbars(&truth, &records, 500, 2)?;
    println!("fidelity {:.5} +- {:.5}", f.point, f.sigma);

    let inputs = [PureState::zero(), PureState::one(), PureState::plus_x(), PureState::plus_y()]
        .map(|s| s.density_matrix());
    let bin: Vec<_> = inputs.iter().map(|r| r.bloch_vector()).collect::<Result<_>>()?;
    let bout: Vec<_> = inputs
        .iter()
        .map(|r| recover_rp(r, 0.6)?.state.bloch_vector())
        .collect::<Result<_>>()?;
    let map = reconstruct_process(&bin, &bout)?;
    println!("process map {:?} offset {:?}", map.a, map.c);
    Ok(())
}
