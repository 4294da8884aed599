//! Monte Carlo simulation of the recovery pulse sequence, one shot at a time.
//!
//! A shot carries a pure state on the three-level space `{|0>, |1>, |2>}`.
//! Deshelving samples one Kraus outcome of
//! [`HeraldedChannel::deshelve_with_leakage`] by the Born rule, detection
//! windows `A` and `B` project onto the computational space (finding the ion
//! in `|2>` rejects the shot), and window `C` reads out the qubit in the
//! computational basis after the analysis rotation. Detection is ideal.
//!
//! Dephasing is quasi-static: one phase `phi` is drawn per shot and every
//! `Wait(w)` element applies `exp(i w phi sigma_z)`.
//!
//! Sequence layout (full recovery):
//!
//! ```text
//! prepare |0>, rotate to the input state
//! [dwell]  deshelve(p)  detect A  wait(1)  pi_y
//! [dwell]  deshelve(p)  detect B  wait(1)
//! cpmg:     wait(1/2) pi_y wait(1) pi_y wait(1) pi_y wait(1/2)
//! no cpmg:  wait(3) pi_y
//! analysis rotation, detect C
//! ```
//!
//! The two halves around the first `pi_y` form a spin echo, so their phases
//! cancel. The closing block stands for the idle interval before readout:
//! with CPMG its three pulses refocus it and together act as the closing
//! `pi_y` of the protocol. Without CPMG it accrues `3 phi` unprotected.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::channel::{check_unit_interval, HeraldedChannel, HeraldedResult};
use crate::error::{Error, Result};
use crate::gates::{dephase, pi_pulse_y, rx, ry, Axis};
use crate::linalg::{c64, ComplexMatrix, C64};
use crate::rng::{stream, StreamRng};
use crate::state::{DensityMatrix, PureState};
use crate::tomography::CountRecord;

/// The four input states of the process tomography set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputState {
    Zero,
    One,
    PlusX,
    PlusY,
}

impl InputState {
    pub const ALL: [InputState; 4] = [
        InputState::Zero,
        InputState::One,
        InputState::PlusX,
        InputState::PlusY,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InputState::Zero => "0",
            InputState::One => "1",
            InputState::PlusX => "x",
            InputState::PlusY => "y",
        }
    }

    pub fn pure_state(self) -> PureState {
        match self {
            InputState::Zero => PureState::zero(),
            InputState::One => PureState::one(),
            InputState::PlusX => PureState::plus_x(),
            InputState::PlusY => PureState::plus_y(),
        }
    }

    /// Rotation applied after pumping to `|0>`; equal to the target state up to global phase.
    pub fn preparation(self) -> Option<ComplexMatrix> {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            InputState::Zero => None,
            InputState::One => Some(ry(PI)),
            InputState::PlusX => Some(ry(FRAC_PI_2)),
            InputState::PlusY => Some(rx(-FRAC_PI_2)),
        }
    }
}

impl FromStr for InputState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0" | "zero" => Ok(InputState::Zero),
            "1" | "one" => Ok(InputState::One),
            "x" | "+x" | "plus_x" => Ok(InputState::PlusX),
            "y" | "+y" | "plus_y" => Ok(InputState::PlusY),
            other => Err(Error::validation(format!("unknown input state '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectLabel {
    A,
    B,
    C,
}

#[derive(Clone, Debug)]
pub enum PulseElement {
    /// Reset to the given pure qubit state.
    Prepare(PureState),
    /// Qubit unitary; `refocusing` pulses pick up the pulse-angle error of the noise model.
    Unitary { op: ComplexMatrix, refocusing: bool },
    Deshelve { p: f64, epsilon: f64 },
    Detect(DetectLabel),
    /// Free evolution; the weight multiplies the per-shot phase.
    Wait(f64),
}

/// Ordered list of sequence elements.
#[derive(Clone, Debug, Default)]
pub struct PulseSequence {
    elements: Vec<PulseElement>,
    analysis: Option<Axis>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, element: PulseElement) -> Result<&mut Self> {
        match &element {
            PulseElement::Prepare(psi) if psi.dim() != 2 => {
                return Err(Error::dimension("prepared state must be a qubit state"));
            }
            PulseElement::Unitary { op, .. } => {
                if op.dim() != 2 {
                    return Err(Error::dimension("sequence unitaries act on the qubit"));
                }
                crate::gates::check_unitary(op)?;
            }
            PulseElement::Deshelve { p, epsilon } => {
                check_unit_interval("p", *p)?;
                check_unit_interval("epsilon", *epsilon)?;
            }
            PulseElement::Wait(w) if !(*w >= 0.0 && w.is_finite()) => {
                return Err(Error::validation(format!("wait weight {w} must be finite and >= 0")));
            }
            _ => {}
        }
        self.elements.push(element);
        Ok(self)
    }

    fn push_refocusing(&mut self) -> Result<&mut Self> {
        self.push(PulseElement::Unitary {
            op: pi_pulse_y(),
            refocusing: true,
        })
    }

    /// Appends the analysis rotation for `axis` and the final detection.
    pub fn push_readout(&mut self, axis: Axis) -> Result<&mut Self> {
        if axis != Axis::Z {
            self.push(PulseElement::Unitary {
                op: axis.analysis_rotation(),
                refocusing: false,
            })?;
        }
        self.analysis = Some(axis);
        self.push(PulseElement::Detect(DetectLabel::C))
    }

    pub fn elements(&self) -> &[PulseElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn analysis_axis(&self) -> Option<Axis> {
        self.analysis
    }

    pub fn refocusing_pulse_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, PulseElement::Unitary { refocusing: true, .. }))
            .count()
    }

    /// Sum of wait weights, with sign flipped after every refocusing pulse.
    /// Zero means quasi-static phase is refocused.
    pub fn net_phase_weight(&self) -> f64 {
        let mut sign = 1.0;
        let mut total = 0.0;
        for e in &self.elements {
            match e {
                PulseElement::Wait(w) => total += sign * w,
                PulseElement::Unitary {
                    refocusing: true, ..
                } => sign = -sign,
                _ => {}
            }
        }
        total
    }
}

/// Which part of the sequence to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// The complete recovery protocol.
    Full,
    /// Stop after the first partial collapse and the first refocusing pulse
    /// (an odd pulse count), then read out.
    MidCollapse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceOptions {
    pub cpmg: bool,
    pub stage: Stage,
    /// Phase weight accrued while deshelving, per unit of `-ln(1 - p)`;
    /// models a pulse whose duration grows with the collapse strength.
    pub deshelve_dwell: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self {
            cpmg: true,
            stage: Stage::Full,
            deshelve_dwell: 0.0,
        }
    }
}

/// Idle weight of the closing block before readout.
pub const CLOSING_WINDOW: f64 = 3.0;
/// Weight of the free evolution in each detection window.
pub const DETECTION_WINDOW: f64 = 1.0;
const MAX_DWELL_LOG: f64 = 30.0;

fn dwell_weight(dwell: f64, p: f64) -> f64 {
    if dwell == 0.0 {
        return 0.0;
    }
    dwell * (-(1.0 - p).ln()).min(MAX_DWELL_LOG)
}

/// Prepare, partially collapse twice around a refocusing pulse, refocus, read out.
pub fn build_fig2_sequence(
    initial: InputState,
    p: f64,
    epsilon: f64,
    analysis: Axis,
    options: &SequenceOptions,
) -> Result<PulseSequence> {
    check_unit_interval("p", p)?;
    check_unit_interval("epsilon", epsilon)?;
    if !(options.deshelve_dwell >= 0.0) {
        return Err(Error::validation("deshelve dwell must be >= 0"));
    }
    let mut seq = PulseSequence::new();
    push_preparation(&mut seq, initial)?;
    let dwell = dwell_weight(options.deshelve_dwell, p);
    for (k, label) in [DetectLabel::A, DetectLabel::B].into_iter().enumerate() {
        if dwell > 0.0 {
            seq.push(PulseElement::Wait(dwell))?;
        }
        seq.push(PulseElement::Deshelve { p, epsilon })?;
        seq.push(PulseElement::Detect(label))?;
        seq.push(PulseElement::Wait(DETECTION_WINDOW))?;
        if k == 0 {
            seq.push_refocusing()?;
            if options.stage == Stage::MidCollapse {
                seq.push_readout(analysis)?;
                return Ok(seq);
            }
        }
    }
    if options.cpmg {
        let tau = CLOSING_WINDOW / 3.0;
        seq.push(PulseElement::Wait(tau / 2.0))?;
        seq.push_refocusing()?;
        seq.push(PulseElement::Wait(tau))?;
        seq.push_refocusing()?;
        seq.push(PulseElement::Wait(tau))?;
        seq.push_refocusing()?;
        seq.push(PulseElement::Wait(tau / 2.0))?;
    } else {
        seq.push(PulseElement::Wait(CLOSING_WINDOW))?;
        seq.push_refocusing()?;
    }
    seq.push_readout(analysis)?;
    Ok(seq)
}

/// `repeats` ideal recoveries in a row, each with leak probability `p_segment` per half.
pub fn build_repeated_recovery_sequence(
    initial: InputState,
    p_segment: f64,
    epsilon: f64,
    repeats: usize,
    analysis: Axis,
) -> Result<PulseSequence> {
    check_unit_interval("p", p_segment)?;
    if repeats == 0 {
        return Err(Error::validation("repeats must be >= 1"));
    }
    let mut seq = PulseSequence::new();
    push_preparation(&mut seq, initial)?;
    for _ in 0..repeats {
        for label in [DetectLabel::A, DetectLabel::B] {
            seq.push(PulseElement::Deshelve {
                p: p_segment,
                epsilon,
            })?;
            seq.push(PulseElement::Detect(label))?;
            seq.push_refocusing()?;
        }
    }
    seq.push_readout(analysis)?;
    Ok(seq)
}

fn push_preparation(seq: &mut PulseSequence, initial: InputState) -> Result<()> {
    seq.push(PulseElement::Prepare(PureState::zero()))?;
    if let Some(op) = initial.preparation() {
        seq.push(PulseElement::Unitary {
            op,
            refocusing: false,
        })?;
    }
    Ok(())
}

/// Distribution of the quasi-static phase drawn once per shot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseNoise {
    None,
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
    /// Deterministic offset, the same every shot.
    Fixed { phi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    phase: PhaseNoise,
    offset: f64,
    pi_pulse_angle_error: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            phase: PhaseNoise::None,
            offset: 0.0,
            pi_pulse_angle_error: 0.0,
        }
    }

    pub fn new(phase: PhaseNoise, pi_pulse_angle_error: f64) -> Result<Self> {
        let width = match phase {
            PhaseNoise::Gaussian { sigma } => sigma,
            PhaseNoise::Uniform { half_width } => half_width,
            PhaseNoise::None => 0.0,
            PhaseNoise::Fixed { phi } => {
                if !phi.is_finite() {
                    return Err(Error::validation("fixed phase must be finite"));
                }
                0.0
            }
        };
        if !(width >= 0.0 && width.is_finite()) {
            return Err(Error::validation(format!(
                "phase noise width {width} must be finite and >= 0"
            )));
        }
        if !pi_pulse_angle_error.is_finite() {
            return Err(Error::validation("pulse angle error must be finite"));
        }
        Ok(Self {
            phase,
            offset: 0.0,
            pi_pulse_angle_error,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(PhaseNoise::Gaussian { sigma }, 0.0)
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        Self::new(PhaseNoise::Uniform { half_width }, 0.0)
    }

    pub fn fixed(phi: f64) -> Result<Self> {
        Self::new(PhaseNoise::Fixed { phi }, 0.0)
    }

    /// Adds a deterministic phase to every draw; must be finite.
    pub fn with_offset(self, offset: f64) -> Self {
        assert!(offset.is_finite(), "phase offset must be finite");
        Self { offset, ..self }
    }

    pub fn phase(&self) -> PhaseNoise {
        self.phase
    }

    /// The part of the per-shot phase that is the same in every shot.
    pub fn deterministic_phase(&self) -> f64 {
        match self.phase {
            PhaseNoise::Fixed { phi } => self.offset + phi,
            _ => self.offset,
        }
    }

    pub fn pi_pulse_angle_error(&self) -> f64 {
        self.pi_pulse_angle_error
    }

    pub fn sample_phi(&self, rng: &mut impl Rng) -> f64 {
        self.offset + self.sample_random_part(rng)
    }

    fn sample_random_part(&self, rng: &mut impl Rng) -> f64 {
        match self.phase {
            PhaseNoise::None => 0.0,
            PhaseNoise::Fixed { phi } => phi,
            PhaseNoise::Gaussian { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma).expect("validated").sample(rng)
                }
            }
            PhaseNoise::Uniform { half_width } => {
                if half_width == 0.0 {
                    0.0
                } else {
                    rng.random_range(-half_width..=half_width)
                }
            }
        }
    }
}

/// Per-shot record. Heralds are `true` when no fluorescence was seen
/// (the ion stayed in the computational space), i.e. the shot was accepted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryOutcome {
    pub herald_a: bool,
    pub herald_b: bool,
    /// `true` when the final readout found `|1>`; `false` means the `+1`
    /// eigenstate of the analysis axis.
    pub detect_c: bool,
    pub sampled_phi: f64,
}

impl TrajectoryOutcome {
    pub fn accepted(&self) -> bool {
        self.herald_a && self.herald_b
    }

    /// Accepted and read out as the `+1` eigenstate of the analysis axis.
    pub fn counted_up(&self) -> bool {
        self.accepted() && !self.detect_c
    }
}

type Vec3 = [C64; 3];
type Mat3 = [[C64; 3]; 3];

fn to_mat3(m: &ComplexMatrix) -> Mat3 {
    let m = if m.dim() == 2 {
        crate::gates::embed_with_leakage(m)
    } else {
        m.clone()
    };
    let mut out = [[c64(0.0, 0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

fn mat3_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    let mut out = [c64(0.0, 0.0); 3];
    for i in 0..3 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

fn norm_sqr(v: &Vec3) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Clone, Debug)]
enum Step {
    Prepare(Vec3),
    Unitary(Mat3),
    Wait(f64),
    Kraus(Vec<Mat3>),
    Herald(DetectLabel),
    Readout,
}

/// A sequence lowered to fixed-size operations for the shot loop.
#[derive(Clone, Debug)]
pub struct CompiledSequence {
    steps: Vec<Step>,
    noise: NoiseModel,
    analysis: Option<Axis>,
    // undoes the analysis rotation so the returned state is the one being read out
    unrotate: Option<[[C64; 2]; 2]>,
}

impl CompiledSequence {
    pub fn new(seq: &PulseSequence, noise: &NoiseModel) -> Result<Self> {
        let mut steps = Vec::with_capacity(seq.len());
        let angle_error = ry(noise.pi_pulse_angle_error);
        for e in seq.elements() {
            steps.push(match e {
                PulseElement::Prepare(psi) => {
                    let psi = psi.embed(3);
                    let a = psi.amplitudes();
                    Step::Prepare([a[0], a[1], a[2]])
                }
                PulseElement::Unitary { op, refocusing } => {
                    if *refocusing && noise.pi_pulse_angle_error != 0.0 {
                        Step::Unitary(to_mat3(&(&angle_error * op)))
                    } else {
                        Step::Unitary(to_mat3(op))
                    }
                }
                PulseElement::Wait(w) => Step::Wait(*w),
                PulseElement::Deshelve { p, epsilon } => {
                    let ch = HeraldedChannel::deshelve_with_leakage(*p, *epsilon)?;
                    Step::Kraus(ch.all_ops().map(|k| to_mat3(&k.op)).collect())
                }
                PulseElement::Detect(DetectLabel::C) => Step::Readout,
                PulseElement::Detect(label) => Step::Herald(*label),
            });
        }
        let unrotate = seq.analysis_axis().filter(|a| *a != Axis::Z).map(|a| {
            let u = a.analysis_rotation().adjoint();
            [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]]
        });
        Ok(Self {
            steps,
            noise: *noise,
            analysis: seq.analysis_axis(),
            unrotate,
        })
    }

    pub fn analysis_axis(&self) -> Option<Axis> {
        self.analysis
    }

    /// Runs one shot; also returns the qubit state just before the analysis
    /// rotation when the shot was accepted.
    pub fn run(&self, rng: &mut impl Rng) -> (TrajectoryOutcome, Option<PureState>) {
        let phi = self.noise.sample_phi(rng);
        let mut out = TrajectoryOutcome {
            herald_a: true,
            herald_b: true,
            detect_c: false,
            sampled_phi: phi,
        };
        let mut psi: Vec3 = [c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)];
        let mut final_state = None;
        for step in &self.steps {
            match step {
                Step::Prepare(v) => psi = *v,
                Step::Unitary(u) => psi = mat3_vec(u, &psi),
                Step::Wait(w) => {
                    let ph = C64::from_polar(1.0, w * phi);
                    psi[0] *= ph;
                    psi[1] *= ph.conj();
                }
                Step::Kraus(ops) => {
                    let r: f64 = rng.random();
                    let mut cumulative = 0.0;
                    let mut chosen = None;
                    let mut last_nonzero = None;
                    for op in ops {
                        let branch = mat3_vec(op, &psi);
                        let prob = norm_sqr(&branch);
                        if prob > 0.0 {
                            last_nonzero = Some((branch, prob));
                        }
                        cumulative += prob;
                        if r < cumulative && prob > 0.0 {
                            chosen = Some((branch, prob));
                            break;
                        }
                    }
                    let (branch, prob) = chosen
                        .or(last_nonzero)
                        .expect("complete Kraus set has an outcome");
                    let scale = 1.0 / prob.sqrt();
                    psi = branch.map(|z| z * scale);
                }
                Step::Herald(label) => {
                    let leaked = psi[2].norm_sqr();
                    let reject = leaked > 0.0 && rng.random::<f64>() < leaked;
                    if reject {
                        match label {
                            DetectLabel::A => {
                                out.herald_a = false;
                                out.herald_b = false;
                            }
                            _ => out.herald_b = false,
                        }
                        return (out, None);
                    }
                    psi[2] = c64(0.0, 0.0);
                    let scale = 1.0 / norm_sqr(&psi).sqrt();
                    psi = psi.map(|z| z * scale);
                }
                Step::Readout => {
                    let p0 = psi[0].norm_sqr() / (psi[0].norm_sqr() + psi[1].norm_sqr());
                    let (a, b) = match &self.unrotate {
                        Some(u) => (
                            u[0][0] * psi[0] + u[0][1] * psi[1],
                            u[1][0] * psi[0] + u[1][1] * psi[1],
                        ),
                        None => (psi[0], psi[1]),
                    };
                    final_state =
                        Some(PureState::normalized(vec![a, b]).expect("nonzero qubit state"));
                    out.detect_c = rng.random::<f64>() >= p0;
                }
            }
        }
        (out, final_state)
    }
}

/// One stochastic run of `seq`.
pub fn sample_shot(seq: &PulseSequence, noise: &NoiseModel, rng: &mut impl Rng) -> TrajectoryOutcome {
    sample_shot_with_state(seq, noise, rng).0
}

pub fn sample_shot_with_state(
    seq: &PulseSequence,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> (TrajectoryOutcome, Option<PureState>) {
    CompiledSequence::new(seq, noise)
        .expect("sequence elements are validated on push")
        .run(rng)
}

/// Aggregate counts over a batch of shots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchStats {
    pub shots: u64,
    pub accepted: u64,
    /// Accepted shots read out as the `+1` eigenstate of the analysis axis.
    pub c_up: u64,
}

impl BatchStats {
    fn record(outcome: &TrajectoryOutcome) -> Self {
        Self {
            shots: 1,
            accepted: outcome.accepted() as u64,
            c_up: outcome.counted_up() as u64,
        }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            shots: self.shots + other.shots,
            accepted: self.accepted + other.accepted,
            c_up: self.c_up + other.c_up,
        }
    }

    pub fn acceptance_fraction(&self) -> f64 {
        self.accepted as f64 / self.shots as f64
    }

    /// Binomial standard error of the acceptance fraction.
    pub fn acceptance_sigma(&self) -> f64 {
        let f = self.acceptance_fraction();
        (f * (1.0 - f) / self.shots as f64).sqrt()
    }

    /// Readout counts among accepted shots.
    pub fn count_record(&self, axis: Axis) -> Result<CountRecord> {
        CountRecord::new(axis, self.c_up, self.accepted)
    }
}

/// Runs `n_shots` shots in parallel; shot `k` uses stream `k` of `seed`,
/// so the totals do not depend on the number of workers.
pub fn run_batch(
    seq: &PulseSequence,
    noise: &NoiseModel,
    n_shots: u64,
    seed: u64,
) -> Result<BatchStats> {
    if n_shots == 0 {
        return Err(Error::validation("n_shots must be >= 1"));
    }
    let compiled = CompiledSequence::new(seq, noise)?;
    Ok((0..n_shots)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            BatchStats::record(&compiled.run(&mut rng).0)
        })
        .reduce(BatchStats::default, BatchStats::merge))
}

/// Single-threaded reference for [`run_batch`].
pub fn run_batch_serial(
    seq: &PulseSequence,
    noise: &NoiseModel,
    n_shots: u64,
    seed: u64,
) -> Result<BatchStats> {
    if n_shots == 0 {
        return Err(Error::validation("n_shots must be >= 1"));
    }
    let compiled = CompiledSequence::new(seq, noise)?;
    Ok((0..n_shots)
        .map(|k| {
            let mut rng: StreamRng = stream(seed, k);
            BatchStats::record(&compiled.run(&mut rng).0)
        })
        .fold(BatchStats::default(), BatchStats::merge))
}

/// Average of the exact pre-readout qubit states over accepted shots.
pub fn herald_conditioned_state(
    seq: &PulseSequence,
    noise: &NoiseModel,
    n_shots: u64,
    seed: u64,
) -> Result<(DensityMatrix, BatchStats)> {
    if n_shots == 0 {
        return Err(Error::validation("n_shots must be >= 1"));
    }
    let compiled = CompiledSequence::new(seq, noise)?;
    let zero = || (BatchStats::default(), [c64(0.0, 0.0); 4]);
    let (stats, sum) = (0..n_shots)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let (outcome, state) = compiled.run(&mut rng);
            let mut acc = [c64(0.0, 0.0); 4];
            if let (true, Some(psi)) = (outcome.accepted(), state) {
                let a = psi.amplitudes();
                acc = [
                    a[0] * a[0].conj(),
                    a[0] * a[1].conj(),
                    a[1] * a[0].conj(),
                    a[1] * a[1].conj(),
                ];
            }
            (BatchStats::record(&outcome), acc)
        })
        .reduce(zero, |(s1, m1), (s2, m2)| {
            (s1.merge(s2), [m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2], m1[3] + m2[3]])
        });
    if stats.accepted == 0 {
        return Err(Error::DegenerateHerald { probability: 0.0 });
    }
    let inv = 1.0 / stats.accepted as f64;
    let mat = ComplexMatrix::from_vec(2, sum.iter().map(|z| z * inv).collect())?;
    Ok((DensityMatrix::new(mat)?, stats))
}

/// Deterministic herald-conditioned state at readout for a fixed phase
/// `phi`: the density-matrix counterpart of [`CompiledSequence::run`].
/// `success_prob` is the probability that every herald accepts.
pub fn conditioned_evolution(
    seq: &PulseSequence,
    noise: &NoiseModel,
    phi: f64,
) -> Result<HeraldedResult> {
    let angle_error = ry(noise.pi_pulse_angle_error);
    let mut rho = PureState::zero().embed(3).density_matrix().into_matrix();
    let mut success = 1.0;
    for e in seq.elements() {
        match e {
            PulseElement::Prepare(psi) => {
                rho = psi.embed(3).density_matrix().into_matrix();
            }
            PulseElement::Unitary { op, refocusing } => {
                let u = if *refocusing && noise.pi_pulse_angle_error != 0.0 {
                    &angle_error * op
                } else {
                    op.clone()
                };
                rho = crate::gates::embed_with_leakage(&u).conjugate(&rho);
            }
            PulseElement::Wait(w) => {
                rho = crate::gates::embed_with_leakage(&dephase(w * phi)).conjugate(&rho);
            }
            PulseElement::Deshelve { p, epsilon } => {
                let ch = HeraldedChannel::deshelve_with_leakage(*p, *epsilon)?;
                let state = DensityMatrix::from_matrix_unchecked(rho);
                rho = ch.apply_unconditioned(&state)?.into_matrix();
            }
            PulseElement::Detect(DetectLabel::C) => break,
            PulseElement::Detect(_) => {
                let (block, kept) = DensityMatrix::from_matrix_unchecked(rho).computational_block()?;
                let (state, _) = DensityMatrix::normalized_from(block)?;
                success *= kept;
                rho = state.embed_with_leakage()?.into_matrix();
            }
        }
    }
    let (block, kept) = DensityMatrix::from_matrix_unchecked(rho).computational_block()?;
    let (state, _) = DensityMatrix::normalized_from(block)?;
    Ok(HeraldedResult {
        state,
        success_prob: success * kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::recover_rp_prime;
    use crate::gates::apply_unitary;
    use crate::rng::stream;

    fn full(initial: InputState, p: f64, eps: f64, axis: Axis, cpmg: bool) -> PulseSequence {
        let opts = SequenceOptions {
            cpmg,
            ..SequenceOptions::default()
        };
        build_fig2_sequence(initial, p, eps, axis, &opts).unwrap()
    }

    #[test]
    fn sequence_shape() {
        let seq = full(InputState::PlusX, 0.3, 0.0, Axis::X, true);
        assert_eq!(seq.refocusing_pulse_count(), 4);
        assert_eq!(seq.net_phase_weight(), 0.0);
        assert_eq!(seq.analysis_axis(), Some(Axis::X));
        let plain = full(InputState::PlusX, 0.3, 0.0, Axis::X, false);
        assert_eq!(plain.refocusing_pulse_count(), 2);
        assert_eq!(plain.net_phase_weight().abs(), CLOSING_WINDOW);
        let mid = build_fig2_sequence(
            InputState::PlusX,
            0.3,
            0.0,
            Axis::Z,
            &SequenceOptions {
                stage: Stage::MidCollapse,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(mid.refocusing_pulse_count() % 2, 1);
    }

    #[test]
    fn invalid_elements_rejected() {
        let mut seq = PulseSequence::new();
        assert!(seq.push(PulseElement::Wait(-1.0)).is_err());
        assert!(seq.push(PulseElement::Deshelve { p: 1.2, epsilon: 0.0 }).is_err());
        let bad = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]).unwrap();
        assert!(seq
            .push(PulseElement::Unitary {
                op: bad,
                refocusing: false
            })
            .is_err());
        assert!(build_fig2_sequence(InputState::Zero, -0.1, 0.0, Axis::Z, &Default::default()).is_err());
        assert!("q".parse::<InputState>().is_err());
    }

    #[test]
    fn noiseless_identity_path() {
        // p = 0, no CPMG: the two refocusing pulses compose to the identity
        let seq = full(InputState::Zero, 0.0, 0.0, Axis::Z, false);
        let mut rng = stream(1, 0);
        for _ in 0..50 {
            let o = sample_shot(&seq, &NoiseModel::none(), &mut rng);
            assert!(o.herald_a && o.herald_b);
            assert!(!o.detect_c, "no population in |1> at readout");
        }
    }

    #[test]
    fn certain_leakage_always_rejects() {
        let seq = full(InputState::One, 1.0, 0.0, Axis::Z, true);
        let mut rng = stream(2, 0);
        for _ in 0..100 {
            let o = sample_shot(&seq, &NoiseModel::none(), &mut rng);
            assert!(!o.herald_a);
            assert!(!o.accepted());
        }
    }

    #[test]
    fn no_leakage_always_accepts() {
        let seq = full(InputState::PlusY, 0.0, 0.0355, Axis::Y, true);
        let stats = run_batch(&seq, &NoiseModel::gaussian(0.4).unwrap(), 2000, 3).unwrap();
        assert_eq!(stats.accepted, 2000);
    }

    #[test]
    fn fixed_seed_reproduces_outcomes() {
        let seq = full(InputState::PlusX, 0.6, 0.0355, Axis::X, true);
        let noise = NoiseModel::gaussian(0.3).unwrap();
        let run = || {
            let mut rng = stream(99, 0);
            (0..200).map(|_| sample_shot(&seq, &noise, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn parallel_matches_serial() {
        let seq = full(InputState::PlusX, 0.5, 0.0355, Axis::X, true);
        let noise = NoiseModel::gaussian(0.2).unwrap();
        let par = run_batch(&seq, &noise, 5000, 17).unwrap();
        let ser = run_batch_serial(&seq, &noise, 5000, 17).unwrap();
        assert_eq!(par, ser);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let three = pool.install(|| run_batch(&seq, &noise, 5000, 17).unwrap());
        assert_eq!(par, three);
    }

    #[test]
    fn zero_shots_rejected() {
        let seq = full(InputState::Zero, 0.5, 0.0, Axis::Z, true);
        assert!(run_batch(&seq, &NoiseModel::none(), 0, 1).is_err());
    }

    #[test]
    fn herald_a_frequency_matches_channel() {
        // |1> at p = 0.5: accept probability 1 - p(1 - epsilon)
        let (p, eps) = (0.5, 0.0355);
        let mut seq = PulseSequence::new();
        seq.push(PulseElement::Prepare(PureState::one())).unwrap();
        seq.push(PulseElement::Deshelve { p, epsilon: eps }).unwrap();
        seq.push(PulseElement::Detect(DetectLabel::A)).unwrap();
        seq.push_readout(Axis::Z).unwrap();
        let expected = HeraldedChannel::deshelve(p, eps)
            .unwrap()
            .accept_probability(&PureState::one().density_matrix())
            .unwrap();
        assert!((expected - (1.0 - p * (1.0 - eps))).abs() < 1e-15);
        let n = 100_000;
        let stats = run_batch(&seq, &NoiseModel::none(), n, 5).unwrap();
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((stats.acceptance_fraction() - expected).abs() <= 3.0 * sigma);
    }

    #[test]
    fn full_sequence_acceptance_matches_recovery() {
        let (p, eps) = (0.8, 0.0355);
        let seq = full(InputState::PlusX, p, eps, Axis::Z, true);
        let expected = recover_rp_prime(&PureState::plus_x().density_matrix(), p, eps)
            .unwrap()
            .success_prob;
        let n = 100_000;
        let stats = run_batch(&seq, &NoiseModel::gaussian(0.3).unwrap(), n, 8).unwrap();
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (stats.acceptance_fraction() - expected).abs() <= 3.0 * sigma,
            "{} vs {expected}",
            stats.acceptance_fraction()
        );
    }

    #[test]
    fn echo_cancels_quasi_static_phase() {
        let n = 20_000;
        let noise = NoiseModel::gaussian(0.3).unwrap();
        let on = run_batch(&full(InputState::PlusX, 0.0, 0.0, Axis::X, true), &noise, n, 4).unwrap();
        let contrast_on = 2.0 * on.c_up as f64 / on.accepted as f64 - 1.0;
        assert!(contrast_on >= 0.999, "contrast with CPMG {contrast_on}");

        let off = run_batch(&full(InputState::PlusX, 0.0, 0.0, Axis::X, false), &noise, n, 4).unwrap();
        let contrast_off = 2.0 * off.c_up as f64 / off.accepted as f64 - 1.0;
        // x contrast averages cos(2 W phi) over the Gaussian: exp(-(2 W sigma)^2 / 2)
        let predicted = (-(2.0 * CLOSING_WINDOW * 0.3f64).powi(2) / 2.0).exp();
        let sigma = ((1.0 - predicted * predicted) / n as f64).sqrt();
        assert!(contrast_off < 0.999);
        assert!((contrast_off - predicted).abs() <= 4.0 * sigma, "{contrast_off} vs {predicted}");
    }

    #[test]
    fn echo_statistics_independent_of_phase() {
        let n = 50_000u64;
        for axis in Axis::ALL {
            let seq = full(InputState::PlusX, 0.6, 0.0355, axis, true);
            let a = run_batch(&seq, &NoiseModel::fixed(0.0).unwrap(), n, 6).unwrap();
            let b = run_batch(&seq, &NoiseModel::fixed(1.0).unwrap(), n, 7).unwrap();
            let fa = a.c_up as f64 / a.accepted as f64;
            let fb = b.c_up as f64 / b.accepted as f64;
            let pooled = (a.c_up + b.c_up) as f64 / (a.accepted + b.accepted) as f64;
            let sigma = (pooled * (1.0 - pooled) * (1.0 / a.accepted as f64 + 1.0 / b.accepted as f64)).sqrt();
            assert!((fa - fb).abs() <= 3.0 * sigma.max(1e-12), "{axis:?}: {fa} vs {fb}");
            let s = ((a.acceptance_fraction() * (1.0 - a.acceptance_fraction())) * 2.0 / n as f64).sqrt();
            assert!((a.acceptance_fraction() - b.acceptance_fraction()).abs() <= 3.0 * s);
        }
    }

    #[test]
    fn conditioned_state_matches_recovery_map() {
        let n = 40_000;
        for initial in InputState::ALL {
            for eps in [0.0, 0.0355] {
                let p = 0.7;
                let seq = full(initial, p, eps, Axis::Z, true);
                let (rho, stats) =
                    herald_conditioned_state(&seq, &NoiseModel::gaussian(0.3).unwrap(), n, 21).unwrap();
                let exact = recover_rp_prime(&initial.pure_state().density_matrix(), p, eps).unwrap();
                let td = rho.trace_distance(&exact.state).unwrap();
                assert!(td <= 4.0 / (stats.accepted as f64).sqrt(), "{initial:?} eps={eps}: {td}");
            }
        }
    }

    #[test]
    fn pulse_angle_error_is_applied() {
        let noise = NoiseModel::new(PhaseNoise::None, 0.2).unwrap();
        let seq = full(InputState::Zero, 0.0, 0.0, Axis::Z, false);
        let (rho, _) = herald_conditioned_state(&seq, &noise, 200, 1).unwrap();
        // two over-rotated pulses leave |0> tilted
        let ideal = apply_unitary(&PureState::zero().density_matrix(), &crate::gates::identity()).unwrap();
        assert!(rho.trace_distance(&ideal).unwrap() > 1e-3);
    }

    #[test]
    fn repeated_recovery_sequence_counts() {
        let seq =
            build_repeated_recovery_sequence(InputState::PlusX, 0.1, 0.0, 5, Axis::X).unwrap();
        assert_eq!(seq.refocusing_pulse_count(), 10);
        assert!(build_repeated_recovery_sequence(InputState::Zero, 0.1, 0.0, 0, Axis::Z).is_err());
    }
    #[test]
    fn deterministic_evolution_matches_recovery() {
        let mut rng = stream(12, 0);
        for initial in InputState::ALL {
            let p: f64 = rng.random_range(0.0..0.95);
            let seq = full(initial, p, 0.0355, Axis::Z, true);
            let phi = rng.random_range(-2.0..2.0);
            let det = conditioned_evolution(&seq, &NoiseModel::none(), phi).unwrap();
            let exact = recover_rp_prime(&initial.pure_state().density_matrix(), p, 0.0355).unwrap();
            assert!(det.state.matrix().approx_eq(exact.state.matrix(), 1e-12));
            assert!((det.success_prob - exact.success_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn captured_state_ignores_analysis_axis() {
        let noise = NoiseModel::gaussian(0.4).unwrap();
        let opts = SequenceOptions::default();
        let states: Vec<_> = Axis::ALL
            .iter()
            .map(|&axis| {
                let seq = build_fig2_sequence(InputState::PlusY, 0.4, 0.0355, axis, &opts).unwrap();
                herald_conditioned_state(&seq, &noise, 500, 8).unwrap().0
            })
            .collect();
        for rho in &states[1..] {
            assert!(rho.matrix().approx_eq(states[0].matrix(), 1e-12));
        }
    }
}
