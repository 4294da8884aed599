//! Single-qubit unitaries and their action on density matrices.

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix, C64, VALIDATION_TOL};
use crate::state::DensityMatrix;

fn mat2(a: C64, b: C64, c: C64, d: C64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[a, b], [c, d]]).expect("2x2")
}

pub fn identity() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn pauli_x() -> ComplexMatrix {
    let (o, l) = (c64(0.0, 0.0), c64(1.0, 0.0));
    mat2(o, l, l, o)
}

pub fn pauli_y() -> ComplexMatrix {
    let o = c64(0.0, 0.0);
    mat2(o, c64(0.0, -1.0), c64(0.0, 1.0), o)
}

pub fn pauli_z() -> ComplexMatrix {
    let o = c64(0.0, 0.0);
    mat2(c64(1.0, 0.0), o, o, c64(-1.0, 0.0))
}

/// The refocusing pulse: `sigma_y`, a 180 degree rotation about `y` up to global phase.
pub fn pi_pulse_y() -> ComplexMatrix {
    pauli_y()
}

/// `exp(i phi sigma_z)`: the uncontrolled phase from a field offset.
pub fn dephase(phi: f64) -> ComplexMatrix {
    let o = c64(0.0, 0.0);
    mat2(C64::from_polar(1.0, phi), o, o, C64::from_polar(1.0, -phi))
}

/// `exp(-i theta sigma_x / 2)`.
pub fn rx(theta: f64) -> ComplexMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    mat2(c64(c, 0.0), c64(0.0, -s), c64(0.0, -s), c64(c, 0.0))
}

/// `exp(-i theta sigma_y / 2)`.
pub fn ry(theta: f64) -> ComplexMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    mat2(c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0))
}

/// `exp(-i phi sigma_z / 2)`.
pub fn rz(phi: f64) -> ComplexMatrix {
    let o = c64(0.0, 0.0);
    mat2(C64::from_polar(1.0, -phi / 2.0), o, o, C64::from_polar(1.0, phi / 2.0))
}

/// Measurement axis for tomography and analysis pulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Rotation taking the `+axis` eigenstate to `|0>`, so that a final
    /// `z` measurement reads out this axis.
    pub fn analysis_rotation(self) -> ComplexMatrix {
        match self {
            Axis::X => ry(-std::f64::consts::FRAC_PI_2),
            Axis::Y => rx(std::f64::consts::FRAC_PI_2),
            Axis::Z => identity(),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::validation(format!("unknown measurement axis '{other}'"))),
        }
    }
}

/// Extends a qubit unitary to act trivially on the leakage level `|2>`.
pub fn embed_with_leakage(u: &ComplexMatrix) -> ComplexMatrix {
    u.embed(3, c64(1.0, 0.0)).expect("qubit unitary")
}

pub fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    let defect = u.unitarity_defect();
    if defect > VALIDATION_TOL {
        return Err(Error::validation(format!(
            "operator is not unitary (||U^dagger U - I||_F = {defect:.3e})"
        )));
    }
    Ok(())
}

/// `U rho U^dagger`. A qubit unitary applied to a three-level state acts on
/// the computational block only.
pub fn apply_unitary(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix> {
    check_unitary(u)?;
    let u = if u.dim() == 2 && rho.dim() == 3 {
        embed_with_leakage(u)
    } else {
        u.clone()
    };
    if u.dim() != rho.dim() {
        return Err(Error::dimension(format!(
            "unitary of dimension {} applied to a state of dimension {}",
            u.dim(),
            rho.dim()
        )));
    }
    Ok(DensityMatrix::from_matrix_unchecked(u.conjugate(rho.matrix())))
}
