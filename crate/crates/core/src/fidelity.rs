//! State fidelities.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, ASSERTION_TOL};
use crate::state::DensityMatrix;

/// Uhlmann fidelity `tr[(sqrt(rho_i) rho_f sqrt(rho_i))^{1/2}]`.
///
/// Equals `|<i|d>|` for pure states (not its square).
pub fn fidelity(rho_i: &DensityMatrix, rho_f: &DensityMatrix) -> Result<f64> {
    if rho_i.dim() != rho_f.dim() {
        return Err(Error::validation(format!(
            "fidelity of states of unequal dimension ({} vs {})",
            rho_i.dim(),
            rho_f.dim()
        )));
    }
    let s = psd_sqrt(rho_i.matrix())?;
    let inner = s.conjugate(rho_f.matrix());
    Ok(psd_sqrt(&inner)?.trace().re)
}

/// Fidelity of the accepted state after one leakage interval and projection,
/// for the input `a|0> + b|1>`:
/// `(|a|^2 + |b|^2 sqrt(1-p)) / sqrt(1 - |b|^2 p)`.
pub fn pure_fidelity_fm(a: Complex64, b: Complex64, p: f64) -> Result<f64> {
    let (a2, b2) = (a.norm_sqr(), b.norm_sqr());
    if (a2 + b2 - 1.0).abs() > ASSERTION_TOL {
        return Err(Error::validation(format!(
            "amplitudes are not normalized (|a|^2 + |b|^2 = {})",
            a2 + b2
        )));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::validation(format!("p = {p} is outside [0, 1)")));
    }
    let accept = 1.0 - b2 * p;
    if accept <= 0.0 {
        return Err(Error::DegenerateHerald { probability: accept });
    }
    Ok((a2 + b2 * (1.0 - p).sqrt()) / accept.sqrt())
}

/// `(1/2) ||rho - sigma||_1`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.trace_distance(sigma)
}
