//! Simulation of heralded recovery of a qubit from partial collapse.
//!
//! A qubit whose `|1>` level leaks out of the computational space is
//! filtered by projecting back into that space. Doing this twice, with a
//! refocusing pulse in between and after, undoes the partial collapse exactly
//! whenever both projections succeed. This crate provides:
//!
//! - [`linalg`]: small dense complex matrices, a Jacobi eigensolver and the PSD square root
//! - [`state`], [`gates`]: density matrices, Bloch vectors and single-qubit unitaries
//! - [`channel`]: the leakage channels, heralded instruments and recovery protocols
//! - [`fidelity`]: the Uhlmann fidelity and the closed-form single-projection fidelity
//! - [`trajectory`]: Monte Carlo simulation of the pulse sequence with quasi-static dephasing
//! - [`tomography`]: simulated state and process tomography with bootstrap error bars
//! - [`experiment`]: the parameter sweeps, Bloch-sphere averages and other studies
//! - [`output`]: CSV, JSON and SVG writers

pub mod channel;
pub mod error;
pub mod experiment;
pub mod fidelity;
pub mod gates;
pub mod linalg;
pub mod output;
pub mod random_states;
pub mod rng;
pub mod state;
pub mod tomography;
pub mod trajectory;

pub use channel::{
    apply_cp, apply_dp, kraus_identity_check, partial_measure_mp, recover_rp, recover_rp_prime,
    HeraldedChannel, HeraldedResult, KrausOp, DEFAULT_BRANCHING_RATIO,
};
pub use error::{Error, Result};
pub use fidelity::{fidelity, pure_fidelity_fm, trace_distance};
pub use linalg::{hermitian_eig, psd_sqrt, ComplexMatrix, HermitianEigen, Tolerances, C64};
pub use state::{bloch_from_rho, rho_from_bloch, BlochVector, DensityMatrix, PureState};
