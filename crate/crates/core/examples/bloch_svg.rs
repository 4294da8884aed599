//! Writes a Bloch-sphere plot of the state after one partial collapse, for a
//! range of strengths.

use uncollapse::output::{write_bloch_svg, BlochSeries};
use uncollapse::{partial_measure_mp, PureState, Result};

fn main() -> Result<()> {
    let mut series = Vec::new();
    for (label, psi) in [("x", PureState::plus_x()), ("y", PureState::plus_y())] {
        let rho = psi.density_matrix();
        let points = (0..10)
            .map(|k| partial_measure_mp(&rho, 0.1 * k as f64)?.state.bloch_vector())
            .collect::<Result<Vec<_>>>()?;
        series.push(BlochSeries { label: label.into(), points });
    }
    let path = std::env::temp_dir().join("uncollapse-collapse.svg");
    write_bloch_svg(&path, "partial collapse", &series)?;
    println!("{}", path.display());
    Ok(())
}
