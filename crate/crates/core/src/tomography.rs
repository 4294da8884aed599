//! Single-qubit state tomography from finite counts, and the affine Bloch
//! process map fitted from reconstructed input/output pairs.
//!
//! The estimator is linear inversion, `b_k = 2 n_up / n_total - 1`, followed
//! by a radial projection back onto the unit ball when shot noise pushes the
//! estimate outside it.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fidelity::fidelity;
use crate::gates::Axis;
use crate::rng::stream;
use crate::state::{bloch_from_rho, BlochVector, DensityMatrix};

/// Minimum bootstrap replicate count.
pub const MIN_BOOTSTRAP: usize = 100;

/// Outcome counts along one analysis axis; `n_up` counts the `+1` eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountRecord {
    axis: Axis,
    n_up: u64,
    n_total: u64,
}

impl CountRecord {
    pub fn new(axis: Axis, n_up: u64, n_total: u64) -> Result<Self> {
        if n_up > n_total {
            return Err(Error::validation(format!(
                "n_up = {n_up} exceeds n_total = {n_total} on axis {}",
                axis.label()
            )));
        }
        Ok(Self {
            axis,
            n_up,
            n_total,
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn n_up(&self) -> u64 {
        self.n_up
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn frequency(&self) -> Result<f64> {
        if self.n_total == 0 {
            return Err(Error::validation(format!(
                "no counts on axis {}",
                self.axis.label()
            )));
        }
        Ok(self.n_up as f64 / self.n_total as f64)
    }

    /// Binomial resample at the observed frequency.
    pub fn resample(&self, rng: &mut impl Rng) -> Result<Self> {
        let f = self.frequency()?;
        let n_up = Binomial::new(self.n_total, f)
            .map_err(|e| Error::validation(e.to_string()))?
            .sample(rng);
        Ok(Self { n_up, ..*self })
    }
}

/// Probability of the `+1` outcome along `axis`: `(1 + b_axis) / 2`.
pub fn measurement_probability(rho: &DensityMatrix, axis: Axis) -> Result<f64> {
    let b = bloch_from_rho(rho)?;
    let p = 0.5 * (1.0 + b.components()[axis.index()]);
    Ok(p.clamp(0.0, 1.0))
}

pub fn simulate_counts(
    rho: &DensityMatrix,
    axis: Axis,
    n: u64,
    rng: &mut impl Rng,
) -> Result<CountRecord> {
    if n == 0 {
        return Err(Error::validation("shot count must be >= 1"));
    }
    let prob = measurement_probability(rho, axis)?;
    let n_up = Binomial::new(n, prob)
        .map_err(|e| Error::validation(e.to_string()))?
        .sample(rng);
    CountRecord::new(axis, n_up, n)
}

/// Counts on all three axes.
pub fn simulate_tomography(
    rho: &DensityMatrix,
    n_per_axis: u64,
    rng: &mut impl Rng,
) -> Result<[CountRecord; 3]> {
    Ok([
        simulate_counts(rho, Axis::X, n_per_axis, rng)?,
        simulate_counts(rho, Axis::Y, n_per_axis, rng)?,
        simulate_counts(rho, Axis::Z, n_per_axis, rng)?,
    ])
}

/// Scales `b` back to the unit sphere if it lies outside.
pub fn project_to_ball(b: [f64; 3]) -> BlochVector {
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    BlochVector {
        x: b[0] * s,
        y: b[1] * s,
        z: b[2] * s,
    }
}

/// Linear inversion of `+1` probabilities ordered `x, y, z`.
pub fn bloch_from_probabilities(probs: [f64; 3]) -> Result<BlochVector> {
    for p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(format!("probability {p} is outside [0, 1]")));
        }
    }
    Ok(project_to_ball(probs.map(|p| 2.0 * p - 1.0)))
}

pub fn reconstruct_from_probabilities(probs: [f64; 3]) -> Result<DensityMatrix> {
    Ok(bloch_from_probabilities(probs)?.to_density_matrix())
}

/// Bloch estimate from one record per axis, in any order.
pub fn estimate_bloch(records: &[CountRecord]) -> Result<BlochVector> {
    let mut probs = [None; 3];
    for r in records {
        let slot = &mut probs[r.axis.index()];
        if slot.is_some() {
            return Err(Error::validation(format!(
                "duplicate record for axis {}",
                r.axis.label()
            )));
        }
        *slot = Some(r.frequency()?);
    }
    let mut out = [0.0; 3];
    for axis in Axis::ALL {
        out[axis.index()] = probs[axis.index()].ok_or_else(|| {
            Error::validation(format!("missing record for axis {}", axis.label()))
        })?;
    }
    bloch_from_probabilities(out)
}

pub fn reconstruct_state(records: &[CountRecord]) -> Result<DensityMatrix> {
    Ok(estimate_bloch(records)?.to_density_matrix())
}

/// Affine Bloch map `b_out = A b_in + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessMap {
    pub a: [[f64; 3]; 3],
    pub c: [f64; 3],
}

impl ProcessMap {
    pub const IDENTITY: ProcessMap = ProcessMap {
        a: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        c: [0.0; 3],
    };

    pub fn apply(&self, b: &BlochVector) -> [f64; 3] {
        let v = b.components();
        let mut out = self.c;
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..3).map(|j| self.a[i][j] * v[j]).sum::<f64>();
        }
        out
    }

    /// Largest entrywise difference from `other`, over both `A` and `c`.
    pub fn max_deviation(&self, other: &ProcessMap) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            d = d.max((self.c[i] - other.c[i]).abs());
            for j in 0..3 {
                d = d.max((self.a[i][j] - other.a[i][j]).abs());
            }
        }
        d
    }

    /// Frobenius norm of `A^T A - I`; zero for unitary channels.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let ata: f64 = (0..3).map(|k| self.a[k][i] * self.a[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                s += (ata - target).powi(2);
            }
        }
        s.sqrt()
    }
}

const GRAM_PIVOT_TOL: f64 = 1e-10;

/// Solves the 4x4 system `m x = rhs` by Gaussian elimination with partial pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut rhs: [[f64; 3]; 4]) -> Option<[[f64; 3]; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < GRAM_PIVOT_TOL {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            for k in 0..3 {
                rhs[row][k] -= f * rhs[col][k];
            }
        }
    }
    let mut x = [[0.0; 3]; 4];
    for row in (0..4).rev() {
        for k in 0..3 {
            let tail: f64 = (row + 1..4).map(|j| m[row][j] * x[j][k]).sum();
            x[row][k] = (rhs[row][k] - tail) / m[row][row];
        }
    }
    Some(x)
}

/// Least-squares affine fit of `outputs` against `inputs` (at least four
/// affinely independent inputs). Exact for four inputs.
pub fn reconstruct_process(inputs: &[BlochVector], outputs: &[BlochVector]) -> Result<ProcessMap> {
    if inputs.len() != outputs.len() {
        return Err(Error::validation(format!(
            "{} inputs but {} outputs",
            inputs.len(),
            outputs.len()
        )));
    }
    if inputs.len() < 4 {
        return Err(Error::validation("process fit needs at least four input states"));
    }
    // normal equations for rows [x, y, z, 1]
    let mut gram = [[0.0; 4]; 4];
    let mut rhs = [[0.0; 3]; 4];
    for (bin, bout) in inputs.iter().zip(outputs) {
        let row = [bin.x, bin.y, bin.z, 1.0];
        let out = bout.components();
        for i in 0..4 {
            for j in 0..4 {
                gram[i][j] += row[i] * row[j];
            }
            for k in 0..3 {
                rhs[i][k] += row[i] * out[k];
            }
        }
    }
    let x = solve4(gram, rhs)
        .ok_or_else(|| Error::validation("input states do not span the Bloch ball affinely"))?;
    let mut map = ProcessMap {
        a: [[0.0; 3]; 3],
        c: x[3],
    };
    for (i, row) in map.a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = x[j][i];
        }
    }
    Ok(map)
}

/// Point estimate and bootstrap spread of a fidelity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityEstimate {
    /// Fidelity of the reconstruction from the observed counts.
    pub point: f64,
    /// Mean over bootstrap replicates.
    pub mean: f64,
    /// Standard deviation over bootstrap replicates.
    pub sigma: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn resample_all(records: &[CountRecord], rng: &mut impl Rng) -> Result<Vec<CountRecord>> {
    records.iter().map(|r| r.resample(rng)).collect()
}

fn check_bootstrap(n_bootstrap: usize) -> Result<()> {
    if n_bootstrap < MIN_BOOTSTRAP {
        return Err(Error::validation(format!(
            "n_bootstrap = {n_bootstrap} is below the minimum of {MIN_BOOTSTRAP}"
        )));
    }
    Ok(())
}

/// Fidelity of the reconstructed state with a known `truth`, with error bar
/// from a parametric bootstrap of the counts. Replicate `k` uses stream `k` of `seed`.
pub fn fidelity_with_errorbars(
    truth: &DensityMatrix,
    records: &[CountRecord],
    n_bootstrap: usize,
    seed: u64,
) -> Result<FidelityEstimate> {
    check_bootstrap(n_bootstrap)?;
    let point = fidelity(truth, &reconstruct_state(records)?)?;
    let samples = (0..n_bootstrap as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            fidelity(truth, &reconstruct_state(&resample_all(records, &mut rng)?)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, sigma) = mean_std(&samples);
    Ok(FidelityEstimate { point, mean, sigma })
}

/// Fidelity between two reconstructed states, bootstrapping both record sets.
pub fn pair_fidelity_with_errorbars(
    reference: &[CountRecord],
    records: &[CountRecord],
    n_bootstrap: usize,
    seed: u64,
) -> Result<FidelityEstimate> {
    check_bootstrap(n_bootstrap)?;
    let point = fidelity(&reconstruct_state(reference)?, &reconstruct_state(records)?)?;
    let samples = (0..n_bootstrap as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let r = reconstruct_state(&resample_all(reference, &mut rng)?)?;
            let s = reconstruct_state(&resample_all(records, &mut rng)?)?;
            fidelity(&r, &s)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean, sigma) = mean_std(&samples);
    Ok(FidelityEstimate { point, mean, sigma })
}
