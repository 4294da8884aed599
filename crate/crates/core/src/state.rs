//! Pure states, density matrices and Bloch vectors.
//!
//! Bloch convention: `|0>` is the north pole, and for a qubit density matrix
//! `x = 2 Re rho_01`, `y = 2 Im rho_10`, `z = rho_00 - rho_11`, so that
//! `rho = (I + x X + y Y + z Z) / 2`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{
    c64, hermitian_eig, ComplexMatrix, C64, ASSERTION_TOL, EQUALITY_TOL, VALIDATION_TOL,
};

/// Normalized state vector.
#[derive(Clone, Debug)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Requires unit norm within [`ASSERTION_TOL`].
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > ASSERTION_TOL {
            return Err(Error::validation(format!(
                "state vector is not normalized (|psi|^2 = {norm2})"
            )));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm <= EQUALITY_TOL {
            return Err(Error::validation("cannot normalize the zero vector"));
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// `a|0> + b|1>`.
    pub fn qubit(a: C64, b: C64) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amps = vec![c64(0.0, 0.0); dim];
        amps[k] = c64(1.0, 0.0);
        Self { amps }
    }

    pub fn zero() -> Self {
        Self::basis(2, 0)
    }

    pub fn one() -> Self {
        Self::basis(2, 1)
    }

    /// `(|0> + |1>) / sqrt 2`, Bloch vector `+x`.
    pub fn plus_x() -> Self {
        Self {
            amps: vec![c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0)],
        }
    }

    /// `(|0> + i|1>) / sqrt 2`, Bloch vector `+y`.
    pub fn plus_y() -> Self {
        Self {
            amps: vec![c64(FRAC_1_SQRT_2, 0.0), c64(0.0, FRAC_1_SQRT_2)],
        }
    }

    /// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            amps: vec![
                c64((theta / 2.0).cos(), 0.0),
                C64::from_polar((theta / 2.0).sin(), phi),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, k: usize) -> C64 {
        self.amps[k]
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Pads with zero amplitudes up to `dim`.
    pub fn embed(&self, dim: usize) -> Self {
        let mut amps = self.amps.clone();
        amps.resize(dim, c64(0.0, 0.0));
        Self { amps }
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        DensityMatrix {
            mat: ComplexMatrix::outer(&self.amps, &self.amps).expect("supported dimension"),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity within [`ASSERTION_TOL`].
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let herm = mat.hermiticity_defect();
        if herm > ASSERTION_TOL {
            return Err(Error::validation(format!(
                "density matrix is not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > ASSERTION_TOL || tr.im.abs() > ASSERTION_TOL {
            return Err(Error::validation(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min = hermitian_eig(&mat)?.min_eigenvalue();
        if min < -ASSERTION_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self { mat })
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn from_matrix_unchecked(mat: ComplexMatrix) -> Self {
        Self { mat }
    }

    /// Divides by the trace, which must exceed [`EQUALITY_TOL`].
    pub(crate) fn normalized_from(mat: ComplexMatrix) -> Result<(Self, f64)> {
        let tr = mat.trace().re;
        if tr <= EQUALITY_TOL {
            return Err(Error::DegenerateHerald { probability: tr });
        }
        Ok((Self { mat: mat.scale_real(1.0 / tr) }, tr))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        PureState::basis(dim, k).density_matrix()
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn entry(&self, j: usize, k: usize) -> C64 {
        self.mat[(j, k)]
    }

    pub fn population(&self, k: usize) -> f64 {
        self.mat[(k, k)].re
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eig(&self.mat)
            .map(|e| e.min_eigenvalue())
            .unwrap_or(f64::NAN)
    }

    /// Qubit state placed in the `{|0>, |1>}` block of the three-level space.
    pub fn embed_with_leakage(&self) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::dimension("only qubit states can be embedded"));
        }
        Ok(Self {
            mat: self.mat.embed(3, c64(0.0, 0.0))?,
        })
    }

    /// Unnormalized projection onto the computational subspace: the
    /// `{|0>, |1>}` block and its trace.
    pub fn computational_block(&self) -> Result<(ComplexMatrix, f64)> {
        let block = self.mat.leading_block(2)?;
        let tr = block.trace().re;
        Ok((block, tr))
    }

    /// `(1/2) ||self - other||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::validation("trace distance of states of unequal dimension"));
        }
        Ok(0.5 * crate::linalg::trace_norm(&(&self.mat - &other.mat))?)
    }

    pub fn bloch_vector(&self) -> Result<BlochVector> {
        bloch_from_rho(self)
    }
}

/// Bloch vector of a qubit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ORIGIN: BlochVector = BlochVector {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Rejects vectors longer than `1 + VALIDATION_TOL`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = Self { x, y, z };
        if !(b.norm() <= 1.0 + VALIDATION_TOL) {
            return Err(Error::validation(format!(
                "Bloch vector ({x}, {y}, {z}) lies outside the unit ball"
            )));
        }
        Ok(b)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Polar angle from `+z`.
    pub fn polar_angle(&self) -> f64 {
        let r = self.norm();
        if r == 0.0 {
            0.0
        } else {
            (self.z / r).clamp(-1.0, 1.0).acos()
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        let d = [self.x - other.x, self.y - other.y, self.z - other.z];
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        let half = 0.5;
        let mat = ComplexMatrix::from_rows(&[
            [c64(half * (1.0 + self.z), 0.0), c64(half * self.x, -half * self.y)],
            [c64(half * self.x, half * self.y), c64(half * (1.0 - self.z), 0.0)],
        ])
        .expect("2x2");
        DensityMatrix::from_matrix_unchecked(mat)
    }
}

pub fn bloch_from_rho(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::dimension(format!(
            "Bloch vector needs a qubit state, got dimension {}",
            rho.dim()
        )));
    }
    Ok(BlochVector {
        x: 2.0 * rho.entry(0, 1).re,
        y: 2.0 * rho.entry(1, 0).im,
        z: rho.population(0) - rho.population(1),
    })
}

pub fn rho_from_bloch(b: &BlochVector) -> Result<DensityMatrix> {
    BlochVector::new(b.x, b.y, b.z)?;
    Ok(b.to_density_matrix())
}
