//! Random states for sampling-based checks and quadrature.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c64, ComplexMatrix, C64};
use crate::state::{DensityMatrix, PureState};

fn gaussian_c64(rng: &mut impl Rng) -> C64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random qubit state.
pub fn random_pure_state(rng: &mut impl Rng) -> PureState {
    random_pure_state_dim(2, rng)
}

pub fn random_pure_state_dim(dim: usize, rng: &mut impl Rng) -> PureState {
    let amps: Vec<C64> = (0..dim).map(|_| gaussian_c64(rng)).collect();
    PureState::normalized(amps).expect("nonzero with probability one")
}

/// Hilbert-Schmidt random density matrix `G G^dagger / tr`, with `G` Ginibre.
pub fn random_density_matrix(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ComplexMatrix::from_vec(dim, (0..dim * dim).map(|_| gaussian_c64(rng)).collect())
        .expect("supported dimension");
    let w = &g * &g.adjoint();
    let tr = w.trace().re;
    DensityMatrix::from_matrix_unchecked(w.scale_real(1.0 / tr))
}

/// Pure or mixed with equal probability.
pub fn random_qubit_state(rng: &mut impl Rng) -> DensityMatrix {
    if rng.random_bool(0.5) {
        random_pure_state(rng).density_matrix()
    } else {
        random_density_matrix(2, rng)
    }
}
