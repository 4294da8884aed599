//! Dense complex matrices of the handful of sizes the simulator needs, plus a
//! cyclic Jacobi eigensolver for Hermitian matrices and the PSD square root
//! built on top of it.
//!
//! Supported dimensions are 2 (qubit), 3 (qubit plus leakage level), 4 (two
//! qubits) and 9 (two qubits each with a leakage level).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const SUPPORTED_DIMS: [usize; 4] = [2, 3, 4, 9];

/// Tolerance set used for validation, assertions, and approximate equality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Input validation (Hermiticity, unitarity, normalization of user input).
    pub validation: f64,
    /// Contract assertions on computed results.
    pub assertion: f64,
    /// Element-wise approximate equality.
    pub equality: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        validation: 1e-9,
        assertion: 1e-10,
        equality: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub const VALIDATION_TOL: f64 = Tolerances::DEFAULT.validation;
pub const ASSERTION_TOL: f64 = Tolerances::DEFAULT.assertion;
pub const EQUALITY_TOL: f64 = Tolerances::DEFAULT.equality;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as rounding noise and clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 64;
const NOISE_FLOOR_ULPS: f64 = 64.0;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn check_dim(dim: usize) -> Result<()> {
    if SUPPORTED_DIMS.contains(&dim) {
        Ok(())
    } else {
        Err(Error::dimension(format!(
            "unsupported matrix dimension {dim} (expected one of {SUPPORTED_DIMS:?})"
        )))
    }
}

/// Square complex matrix stored row-major.
#[derive(Clone)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(Error::dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::dimension(format!(
                    "matrix is not square: {dim} rows but a row of length {}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(dim, data)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        check_dim(dim)?;
        let mut m = Self::zeros(dim);
        for (k, &d) in diag.iter().enumerate() {
            m[(k, k)] = c64(d, 0.0);
        }
        Ok(m)
    }

    /// # Panics
    /// If `dim` is not a supported dimension.
    pub fn zeros(dim: usize) -> Self {
        check_dim(dim).expect("zeros");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    /// # Panics
    /// If `dim` is not a supported dimension.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = c64(1.0, 0.0);
        }
        m
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::dimension("outer product of vectors of unequal length"));
        }
        let dim = u.len();
        check_dim(dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for a in u {
            for b in v {
                data.push(a * b.conj());
            }
        }
        Ok(Self { dim, data })
    }

    /// Matrix unit `scale * |row><col|`.
    pub fn unit(dim: usize, row: usize, col: usize, scale: f64) -> Self {
        let mut m = Self::zeros(dim);
        m[(row, col)] = c64(scale, 0.0);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c64(s, 0.0))
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::dimension(format!(
                "cannot multiply {0}x{0} by {1}x{1}",
                self.dim, rhs.dim
            )));
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// `self * rho * self^dagger`.
    pub fn conjugate(&self, rho: &Self) -> Self {
        self.mul_unchecked(rho).mul_unchecked(&self.adjoint())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        assert_eq!(v.len(), n, "vector length does not match matrix dimension");
        (0..n)
            .map(|i| (0..n).map(|j| self.data[i * n + j] * v[j]).sum())
            .collect()
    }

    /// Kronecker product; the result must still be a supported dimension.
    pub fn kron(&self, rhs: &Self) -> Result<Self> {
        let (n, m) = (self.dim, rhs.dim);
        let dim = n * m;
        check_dim(dim)?;
        let mut out = Self::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Top-left `dim x dim` block.
    pub fn leading_block(&self, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if dim > self.dim {
            return Err(Error::dimension("block larger than matrix"));
        }
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] = self[(i, j)];
            }
        }
        Ok(out)
    }

    /// Places `self` in the top-left corner of a `dim x dim` matrix, padding
    /// the remaining diagonal with `fill`.
    pub fn embed(&self, dim: usize, fill: C64) -> Result<Self> {
        check_dim(dim)?;
        if dim < self.dim {
            return Err(Error::dimension("cannot embed into a smaller space"));
        }
        let mut out = Self::zeros(dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = self[(i, j)];
            }
        }
        for k in self.dim..dim {
            out[(k, k)] = fill;
        }
        Ok(out)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self - &self.adjoint()).frobenius_norm()
    }

    pub fn unitarity_defect(&self) -> f64 {
        (&(&self.adjoint() * self) - &Self::identity(self.dim)).frobenius_norm()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Element-wise equality at [`EQUALITY_TOL`].
    pub fn close_to(&self, other: &Self) -> bool {
        self.approx_eq(other, EQUALITY_TOL)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    /// # Panics
    /// On dimension mismatch; use [`ComplexMatrix::try_mul`] to get an error instead.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_mul(rhs).expect("matrix dimension mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({0}x{0}) [", self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.eigenvectors.dim();
        (0..n).map(|i| self.eigenvectors[(i, k)]).collect()
    }

    /// `V f(diag(lambda)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.dim();
        let mut out = ComplexMatrix::zeros(n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The input is symmetrized as `(H + H^dagger) / 2` after checking that its
/// Hermiticity defect is within [`VALIDATION_TOL`].
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    let defect = h.hermiticity_defect();
    if defect > VALIDATION_TOL {
        return Err(Error::validation(format!(
            "matrix is not Hermitian (||H - H^dagger||_F = {defect:.3e})"
        )));
    }
    let n = h.dim();
    let mut a = (h + &h.adjoint()).scale_real(0.5);
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, col)] = v[(i, k)];
        }
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// One rotation `A <- U^dagger A U`, `V <- V U` annihilating `A[p][q]`.
///
/// `U = diag(1, e^{-i alpha}) * [[c, s], [-s, c]]` on rows/columns `p, q`,
/// with `alpha = arg A[p][q]`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let g = a[(p, q)];
    let abs_g = g.norm();
    if abs_g == 0.0 {
        return;
    }
    let phase = g / abs_g;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * abs_g);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.dim();
    let e_minus = phase.conj();

    // columns: A <- A U
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * e_minus * s;
        a[(k, q)] = akp * s + akq * e_minus * c;
    }
    // rows: A <- U^dagger A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * e_minus * s;
        v[(k, q)] = vkp * s + vkq * e_minus * c;
    }
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(p)?;
    let min = eig.min_eigenvalue();
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    // eigenvalues at the rounding floor are zero; sqrt would amplify them
    let floor = NOISE_FLOOR_ULPS * f64::EPSILON * eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(eig.map_spectrum(|x| if x <= floor { 0.0 } else { x.sqrt() }))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.eigenvalues.iter().map(|x| x.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let data = (0..dim * dim)
            .map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexMatrix::from_vec(dim, data).unwrap()
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, -1.0]).unwrap()
    }

    #[test]
    fn pauli_z_spectrum() {
        let eig = hermitian_eig(&sigma_z()).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_spectrum_dim3() {
        let eig = hermitian_eig(&ComplexMatrix::identity(3)).unwrap();
        for lam in &eig.eigenvalues {
            assert!((lam - 1.0).abs() < 1e-15);
        }
        let vv = &eig.eigenvectors.adjoint() * &eig.eigenvectors;
        assert!(vv.approx_eq(&ComplexMatrix::identity(3), 1e-12));
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &dim in &SUPPORTED_DIMS {
            for _ in 0..200 {
                let a = random_matrix(dim, &mut rng);
                let h = &a + &a.adjoint();
                let eig = hermitian_eig(&h).unwrap();
                assert!(eig.reconstruct().approx_eq(&h, 1e-10), "dim {dim}");
                let vv = &eig.eigenvectors.adjoint() * &eig.eigenvectors;
                assert!(vv.approx_eq(&ComplexMatrix::identity(dim), 1e-10));
                assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // diag(1, 1, 2) in a rotated basis
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(3, &mut rng);
        let q = hermitian_eig(&(&a + &a.adjoint())).unwrap().eigenvectors;
        let d = ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 2.0]).unwrap();
        let h = q.conjugate(&d);
        let eig = hermitian_eig(&h).unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[[c64(0.0, 0.0), c64(1.0, 0.0)], [c64(0.0, 0.0), c64(0.0, 0.0)]])
            .unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            ComplexMatrix::from_vec(5, vec![C64::new(0.0, 0.0); 25]),
            Err(Error::Dimension(_))
        ));
        let ragged: Vec<Vec<C64>> = vec![vec![c64(1.0, 0.0); 2], vec![c64(1.0, 0.0); 3]];
        assert!(matches!(ComplexMatrix::from_rows(&ragged), Err(Error::Dimension(_))));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let p = ComplexMatrix::from_real_diagonal(&[4.0, 9.0]).unwrap();
        let s = psd_sqrt(&p).unwrap();
        let expected = ComplexMatrix::from_real_diagonal(&[2.0, 3.0]).unwrap();
        assert!(s.approx_eq(&expected, 1e-12));
    }

    #[test]
    fn sqrt_of_identity_and_projector() {
        assert!(psd_sqrt(&ComplexMatrix::identity(2))
            .unwrap()
            .approx_eq(&ComplexMatrix::identity(2), 1e-12));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c64(s, 0.0), c64(0.0, s)];
        let proj = ComplexMatrix::outer(&psi, &psi).unwrap();
        assert!(psd_sqrt(&proj).unwrap().approx_eq(&proj, 1e-12));
    }

    #[test]
    fn sqrt_rejects_negative_and_clamps_noise() {
        let p = ComplexMatrix::from_real_diagonal(&[1.0, -1e-6]).unwrap();
        assert!(matches!(psd_sqrt(&p), Err(Error::NotPsd { .. })));
        let p = ComplexMatrix::from_real_diagonal(&[1.0, -5e-11]).unwrap();
        let s = psd_sqrt(&p).unwrap();
        assert_eq!(s[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn sqrt_squares_back_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2usize, 3] {
            for _ in 0..1000 {
                let a = random_matrix(dim, &mut rng);
                let p = &a * &a.adjoint();
                let s = psd_sqrt(&p).unwrap();
                assert!((&(&s * &s) - &p).frobenius_norm() <= 1e-9);
                assert!(s.hermiticity_defect() <= 1e-12);
            }
        }
    }

    #[test]
    fn trace_is_cyclic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let a = random_matrix(3, &mut rng);
            let b = random_matrix(3, &mut rng);
            let d = (&a * &b).trace() - (&b * &a).trace();
            assert!(d.norm() <= 1e-12);
        }
    }

    #[test]
    fn kron_and_embed() {
        let z = sigma_z();
        let zz = z.kron(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(zz.dim(), 4);
        assert_eq!(zz[(2, 2)], c64(-1.0, 0.0));
        let e = z.embed(3, c64(1.0, 0.0)).unwrap();
        assert_eq!(e[(2, 2)], c64(1.0, 0.0));
        assert!(e.leading_block(2).unwrap().close_to(&z));
        assert!(z.kron(&ComplexMatrix::identity(3)).is_err());
    }
}
