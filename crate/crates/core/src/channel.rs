//! Leakage channels, heralded measurements and the recovery protocol.
//!
//! The three-level model has the qubit in `{|0>, |1>}` and a leakage level
//! `|2>`. Deshelving moves population from `|1>` out of the computational
//! space with probability `p`; a fraction `epsilon` of it falls back into `|0>`
//! instead. Every measurement is represented as a [`HeraldedChannel`] whose
//! Kraus operators are split into accepted and rejected outcomes, so the same
//! object serves deterministic conditioning and Monte Carlo sampling.

use crate::error::{Error, Result};
use crate::gates::{dephase, embed_with_leakage, pi_pulse_y};
use crate::linalg::{c64, ComplexMatrix, EQUALITY_TOL};
use crate::state::DensityMatrix;

/// Probability that a deshelving event returns the ion to `|0>`.
pub const DEFAULT_BRANCHING_RATIO: f64 = 0.0355;

/// Completeness tolerance for Kraus sets.
pub const COMPLETENESS_TOL: f64 = 1e-10;

pub(crate) fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::validation(format!("{name} = {value} is outside [0, 1]")));
    }
    Ok(())
}

fn check_leakage_state(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 3 {
        return Err(Error::dimension(format!(
            "leakage channels act on three-level states, got dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

fn check_qubit_state(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 2 {
        return Err(Error::dimension(format!(
            "expected a qubit state, got dimension {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// Incoherent transfer `|1> -> |2>` with probability `p`.
pub fn apply_cp(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    apply_dp(rho, p, 0.0)
}

/// Leakage with branching: of the population leaving `|1>`, a fraction
/// `epsilon` lands in `|0>` and the rest in `|2>`.
pub fn apply_dp(rho: &DensityMatrix, p: f64, epsilon: f64) -> Result<DensityMatrix> {
    check_leakage_state(rho)?;
    check_unit_interval("p", p)?;
    check_unit_interval("epsilon", epsilon)?;
    let survive = (1.0 - p).sqrt();
    let r = rho.matrix();
    let mut out = r.clone();
    let rho11 = r[(1, 1)].re;
    out[(0, 0)] = r[(0, 0)] + c64(epsilon * p * rho11, 0.0);
    out[(0, 1)] = r[(0, 1)] * survive;
    out[(1, 0)] = r[(1, 0)] * survive;
    out[(1, 1)] = r[(1, 1)] * (1.0 - p);
    out[(1, 2)] = r[(1, 2)] * survive;
    out[(2, 1)] = r[(2, 1)] * survive;
    out[(2, 2)] = r[(2, 2)] + c64((1.0 - epsilon) * p * rho11, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// A labeled Kraus operator.
#[derive(Clone, Debug)]
pub struct KrausOp {
    pub label: &'static str,
    pub op: ComplexMatrix,
}

/// Outcome of conditioning on an accepted herald.
#[derive(Clone, Debug)]
pub struct HeraldedResult {
    /// Renormalized post-selected state.
    pub state: DensityMatrix,
    pub success_prob: f64,
}

/// Measurement instrument with Kraus operators split into accepted and rejected outcomes.
#[derive(Clone, Debug)]
pub struct HeraldedChannel {
    dim: usize,
    accept: Vec<KrausOp>,
    reject: Vec<KrausOp>,
}

impl HeraldedChannel {
    /// Checks shapes and completeness `sum K^dagger K = I`.
    pub fn new(accept: Vec<KrausOp>, reject: Vec<KrausOp>) -> Result<Self> {
        let dim = accept
            .first()
            .or(reject.first())
            .map(|k| k.op.dim())
            .ok_or_else(|| Error::validation("heralded channel has no Kraus operators"))?;
        if accept.iter().chain(&reject).any(|k| k.op.dim() != dim) {
            return Err(Error::dimension("Kraus operators of unequal dimension"));
        }
        let channel = Self {
            dim,
            accept,
            reject,
        };
        let defect = channel.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::validation(format!(
                "Kraus operators are not complete (defect {defect:.3e})"
            )));
        }
        Ok(channel)
    }

    /// Qubit-level deshelve-and-detect instrument.
    ///
    /// Accepted: survival `|0><0| + sqrt(1-p)|1><1|` and the branching jump
    /// `sqrt(epsilon p)|0><1|`. Rejected: leakage, recorded as
    /// `sqrt((1-epsilon) p)|1><1|` since the post-leak state is discarded.
    pub fn deshelve(p: f64, epsilon: f64) -> Result<Self> {
        check_unit_interval("p", p)?;
        check_unit_interval("epsilon", epsilon)?;
        let mut survive = ComplexMatrix::identity(2);
        survive[(1, 1)] = c64((1.0 - p).sqrt(), 0.0);
        let mut accept = vec![KrausOp {
            label: "survive",
            op: survive,
        }];
        if epsilon > 0.0 {
            accept.push(KrausOp {
                label: "branch",
                op: ComplexMatrix::unit(2, 0, 1, (epsilon * p).sqrt()),
            });
        }
        let reject = vec![KrausOp {
            label: "leak",
            op: ComplexMatrix::unit(2, 1, 1, ((1.0 - epsilon) * p).sqrt()),
        }];
        Self::new(accept, reject)
    }

    /// The same instrument on the three-level space; the leak jump lands in
    /// `|2>` and its unconditioned action is exactly [`apply_dp`].
    pub fn deshelve_with_leakage(p: f64, epsilon: f64) -> Result<Self> {
        check_unit_interval("p", p)?;
        check_unit_interval("epsilon", epsilon)?;
        let mut survive = ComplexMatrix::identity(3);
        survive[(1, 1)] = c64((1.0 - p).sqrt(), 0.0);
        Self::new(
            vec![
                KrausOp {
                    label: "survive",
                    op: survive,
                },
                KrausOp {
                    label: "branch",
                    op: ComplexMatrix::unit(3, 0, 1, (epsilon * p).sqrt()),
                },
            ],
            vec![KrausOp {
                label: "leak",
                op: ComplexMatrix::unit(3, 2, 1, ((1.0 - epsilon) * p).sqrt()),
            }],
        )
    }

    /// Projection back into the computational space after ideal leakage.
    pub fn partial_measurement(p: f64) -> Result<Self> {
        Self::deshelve(p, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn accepted(&self) -> &[KrausOp] {
        &self.accept
    }

    pub fn rejected(&self) -> &[KrausOp] {
        &self.reject
    }

    pub fn all_ops(&self) -> impl Iterator<Item = &KrausOp> {
        self.accept.iter().chain(&self.reject)
    }

    /// `||sum K^dagger K - I||_F`.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.dim);
        for k in self.all_ops() {
            sum = &sum + &(&k.op.adjoint() * &k.op);
        }
        (&sum - &ComplexMatrix::identity(self.dim)).frobenius_norm()
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::dimension(format!(
                "channel of dimension {} applied to a state of dimension {}",
                self.dim,
                rho.dim()
            )));
        }
        Ok(())
    }

    /// Unnormalized accepted branch `sum_accept K rho K^dagger`.
    pub fn accepted_branch(&self, rho: &DensityMatrix) -> Result<ComplexMatrix> {
        self.check_state(rho)?;
        Ok(sum_conjugations(&self.accept, rho.matrix(), self.dim))
    }

    pub fn accept_probability(&self, rho: &DensityMatrix) -> Result<f64> {
        Ok(self.accepted_branch(rho)?.trace().re)
    }

    /// Conditions on the accepted herald and renormalizes.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<HeraldedResult> {
        let branch = self.accepted_branch(rho)?;
        let (state, success_prob) = DensityMatrix::normalized_from(branch)?;
        Ok(HeraldedResult {
            state,
            success_prob,
        })
    }

    /// Full channel action, ignoring the herald.
    pub fn apply_unconditioned(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_state(rho)?;
        let all: Vec<KrausOp> = self.all_ops().cloned().collect();
        Ok(DensityMatrix::from_matrix_unchecked(sum_conjugations(
            &all,
            rho.matrix(),
            self.dim,
        )))
    }
}

fn sum_conjugations(ops: &[KrausOp], rho: &ComplexMatrix, dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(dim);
    for k in ops {
        out = &out + &k.op.conjugate(rho);
    }
    out
}

/// Single leakage interval followed by projection into the computational space.
pub fn partial_measure_mp(rho: &DensityMatrix, p: f64) -> Result<HeraldedResult> {
    check_qubit_state(rho)?;
    HeraldedChannel::partial_measurement(p)?.apply(rho)
}

/// Two partial measurements sandwiched between refocusing pulses.
///
/// For `p < 1` the output equals the input and the herald succeeds with
/// probability `1 - p` for every input state.
pub fn recover_rp(rho: &DensityMatrix, p: f64) -> Result<HeraldedResult> {
    check_qubit_state(rho)?;
    check_unit_interval("p", p)?;
    if p >= 1.0 {
        return Err(Error::DegenerateHerald { probability: 0.0 });
    }
    let measure = HeraldedChannel::partial_measurement(p)?;
    let flip = pi_pulse_y();
    let first = measure.accepted_branch(rho)?;
    let flipped = DensityMatrix::from_matrix_unchecked(flip.conjugate(&first));
    let second = flip.conjugate(&measure.accepted_branch(&flipped)?);
    let (state, success_prob) = DensityMatrix::normalized_from(second)?;
    Ok(HeraldedResult {
        state,
        success_prob,
    })
}

/// The recovery protocol as realized with a branching leak: embed in the
/// three-level space, apply `D_p`, flip, `D_p`, flip, then project onto the
/// computational space and renormalize.
pub fn recover_rp_prime(rho: &DensityMatrix, p: f64, epsilon: f64) -> Result<HeraldedResult> {
    check_qubit_state(rho)?;
    check_unit_interval("p", p)?;
    check_unit_interval("epsilon", epsilon)?;
    let flip = embed_with_leakage(&pi_pulse_y());
    let mut state = rho.embed_with_leakage()?;
    for _ in 0..2 {
        state = apply_dp(&state, p, epsilon)?;
        state = DensityMatrix::from_matrix_unchecked(flip.conjugate(state.matrix()));
    }
    let (block, success_prob) = state.computational_block()?;
    if success_prob <= EQUALITY_TOL {
        return Err(Error::DegenerateHerald {
            probability: success_prob,
        });
    }
    let (state, success_prob) = DensityMatrix::normalized_from(block)?;
    Ok(HeraldedResult {
        state,
        success_prob,
    })
}

/// Normalization factors of the two heralds in the recovery protocol:
/// `N1 = 1 - rho_11 p` and `N2 = 1 - rho_00 p / N1`.
pub fn herald_normalizations(rho: &DensityMatrix, p: f64) -> Result<(f64, f64)> {
    check_qubit_state(rho)?;
    check_unit_interval("p", p)?;
    let n1 = 1.0 - rho.population(1) * p;
    if n1 <= EQUALITY_TOL {
        return Err(Error::DegenerateHerald { probability: n1 });
    }
    let n2 = 1.0 - rho.population(0) * p / n1;
    Ok((n1, n2))
}

/// `||(N1 N2)^{-1/2} (M e^{i phi sigma_z} sigma_y)^2 - I||_F` for the given state.
pub fn kraus_identity_check(rho: &DensityMatrix, p: f64, phi: f64) -> Result<f64> {
    check_unit_interval("p", p)?;
    if p >= 1.0 {
        return Err(Error::DegenerateHerald { probability: 0.0 });
    }
    let (n1, n2) = herald_normalizations(rho, p)?;
    let norm = n1 * n2;
    if norm <= EQUALITY_TOL {
        return Err(Error::DegenerateHerald { probability: norm });
    }
    let m = HeraldedChannel::partial_measurement(p)?.accepted()[0].op.clone();
    let step = &(&m * &dephase(phi)) * &pi_pulse_y();
    let lhs = (&step * &step).scale_real(norm.powf(-0.5));
    Ok((&lhs - &ComplexMatrix::identity(2)).frobenius_norm())
}
