//! End-to-end studies: the recovery sweep over collapse strength, averages
//! over the Bloch sphere, repeated recovery, the two-qubit encoding check and
//! the tomography demo. [`run`] dispatches on [`ExperimentConfig`] and writes
//! the CSV/JSON/SVG outputs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{check_unit_interval, partial_measure_mp, recover_rp, recover_rp_prime, HeraldedResult};
use crate::error::{Error, Result};
use crate::fidelity::{fidelity, pure_fidelity_fm};
use crate::gates::Axis;
use crate::linalg::{c64, ComplexMatrix, C64};
use crate::output::{round_sig, to_json, write_bloch_svg, write_text, BlochSeries, Table};
use crate::random_states::random_pure_state;
use crate::rng::{derive_seed, stream};
use crate::state::{BlochVector, DensityMatrix, PureState};
use crate::tomography::{pair_fidelity_with_errorbars, CountRecord};
use crate::trajectory::{
    build_fig2_sequence, build_repeated_recovery_sequence, conditioned_evolution, run_batch,
    InputState, NoiseModel, PhaseNoise, SequenceOptions, Stage,
};

pub const SWEEP_HEADER: [&str; 7] = [
    "state",
    "p",
    "predicted_F",
    "predicted_F_M",
    "mc_F",
    "mc_sigma_F",
    "acceptance",
];

/// Shots per sweep cell at `p = 0.1` and `p = 0.9`; linear in between, clamped outside.
pub const SHOT_SCHEDULE: [(f64, u64); 2] = [(0.1, 5_000), (0.9, 12_000)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sweep,
    Average,
    Repeat,
    Dfs,
    TomoDemo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Average => "average",
            ExperimentKind::Repeat => "repeat",
            ExperimentKind::Dfs => "dfs",
            ExperimentKind::TomoDemo => "tomo-demo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Gaussian,
    Uniform,
}

/// Which post-selected protocol to average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    /// A single leak interval followed by projection.
    M,
    /// The recovery protocol with branching leak.
    Rprime,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" => Ok(Protocol::M),
            "rprime" | "r'" => Ok(Protocol::Rprime),
            other => Err(Error::validation(format!("unknown protocol '{other}'"))),
        }
    }
}

/// How states on the sphere are weighted in an average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Every input state counts equally.
    Uniform,
    /// Each input counts in proportion to its herald success probability,
    /// i.e. the average over accepted runs.
    Heralded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quadrature {
    Fibonacci(usize),
    Random { n: usize, seed: u64 },
}

/// Flat run configuration. Every field has a default, so a config file may
/// list any subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub p_values: Vec<f64>,
    pub epsilon: f64,
    /// Shots per sweep cell, split evenly over the three axes; `null` uses the schedule.
    pub shots: Option<u64>,
    pub seed: u64,
    pub states: Vec<String>,
    pub noise: NoiseKind,
    /// Gaussian standard deviation or uniform half width of the per-shot phase, radians.
    pub phi_width: f64,
    /// Deterministic phase added to every shot, radians.
    pub phi_offset: f64,
    pub pi_pulse_angle_error: f64,
    pub cpmg: bool,
    pub deshelve_dwell: f64,
    pub n_bootstrap: usize,
    pub quadrature_nodes: usize,
    pub weighting: Weighting,
    pub gamma_t: f64,
    pub repeats: Vec<usize>,
    pub dfs_samples: usize,
    pub output_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Sweep,
            p_values: default_p_grid(),
            epsilon: crate::channel::DEFAULT_BRANCHING_RATIO,
            shots: None,
            seed: 20_240_601,
            states: InputState::ALL.iter().map(|s| s.label().to_string()).collect(),
            noise: NoiseKind::Gaussian,
            phi_width: 0.2,
            phi_offset: 0.0,
            pi_pulse_angle_error: 0.0,
            cpmg: true,
            deshelve_dwell: 0.0,
            n_bootstrap: 200,
            quadrature_nodes: 10_000,
            weighting: Weighting::Heralded,
            gamma_t: 1.0,
            repeats: vec![1, 2, 5, 10, 100, 1000],
            dfs_samples: 100,
            output_path: "out".to_string(),
        }
    }
}

/// Ten points evenly spaced on `[0.01, 0.94]`.
pub fn default_p_grid() -> Vec<f64> {
    (0..10).map(|k| round_sig(0.01 + 0.93 * k as f64 / 9.0)).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() {
            return Err(Error::validation("p_values is empty"));
        }
        for &p in &self.p_values {
            check_unit_interval("p", p)?;
        }
        check_unit_interval("epsilon", self.epsilon)?;
        if self.shots == Some(0) {
            return Err(Error::validation("shots must be >= 1"));
        }
        self.input_states()?;
        self.noise_model()?;
        if !(self.deshelve_dwell >= 0.0) {
            return Err(Error::validation("deshelve_dwell must be >= 0"));
        }
        if self.n_bootstrap < crate::tomography::MIN_BOOTSTRAP {
            return Err(Error::validation(format!(
                "n_bootstrap must be >= {}",
                crate::tomography::MIN_BOOTSTRAP
            )));
        }
        if self.quadrature_nodes < MIN_NODES {
            return Err(Error::validation(format!("quadrature_nodes must be >= {MIN_NODES}")));
        }
        if !(self.gamma_t >= 0.0 && self.gamma_t.is_finite()) {
            return Err(Error::validation("gamma_t must be finite and >= 0"));
        }
        if self.repeats.is_empty() || self.repeats.contains(&0) {
            return Err(Error::validation("repeats must be a nonempty list of positive counts"));
        }
        if self.output_path.is_empty() {
            return Err(Error::validation("output_path is empty"));
        }
        Ok(())
    }

    pub fn input_states(&self) -> Result<Vec<InputState>> {
        if self.states.is_empty() {
            return Err(Error::validation("states is empty"));
        }
        self.states.iter().map(|s| s.parse()).collect()
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        if !self.phi_offset.is_finite() {
            return Err(Error::validation("phi_offset must be finite"));
        }
        let phase = match self.noise {
            NoiseKind::None => PhaseNoise::None,
            NoiseKind::Gaussian => PhaseNoise::Gaussian { sigma: self.phi_width },
            NoiseKind::Uniform => PhaseNoise::Uniform { half_width: self.phi_width },
        };
        let model = NoiseModel::new(phase, self.pi_pulse_angle_error)?;
        Ok(if self.phi_offset != 0.0 {
            model.with_offset(self.phi_offset)
        } else {
            model
        })
    }

    fn sequence_options(&self, stage: Stage) -> SequenceOptions {
        SequenceOptions {
            cpmg: self.cpmg,
            stage,
            deshelve_dwell: self.deshelve_dwell,
        }
    }

    /// Shots for a cell at collapse strength `p`.
    pub fn shots_for(&self, p: f64) -> u64 {
        self.shots.unwrap_or_else(|| scheduled_shots(p))
    }
}

pub fn scheduled_shots(p: f64) -> u64 {
    let [(p0, n0), (p1, n1)] = SHOT_SCHEDULE;
    let t = ((p - p0) / (p1 - p0)).clamp(0.0, 1.0);
    (n0 as f64 + t * (n1 - n0) as f64).round() as u64
}

/// One `(state, p)` cell of the sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub state: String,
    pub p: f64,
    /// Closed-form fidelity of the recovery protocol with branching.
    pub predicted_f: f64,
    /// Closed-form fidelity of a single projection.
    pub predicted_f_m: f64,
    /// Fidelity between the tomographic reconstructions at `p` and at `p = 0`.
    pub mc_f: f64,
    pub mc_sigma_f: f64,
    pub acceptance: f64,
}

impl SweepRow {
    /// Whether the Monte Carlo estimate lies within `k` error bars of the prediction.
    pub fn within(&self, k: f64) -> bool {
        (self.mc_f - self.predicted_f).abs() <= k * self.mc_sigma_f
    }

    fn values(&self) -> Vec<f64> {
        vec![
            self.p,
            self.predicted_f,
            self.predicted_f_m,
            self.mc_f,
            self.mc_sigma_f,
            self.acceptance,
        ]
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> Result<Table> {
    let mut t = Table::new(&SWEEP_HEADER, 1);
    for r in rows {
        t.push(vec![r.state.clone()], r.values())?;
    }
    Ok(t)
}

pub fn rows_from_table(table: &Table) -> Result<Vec<SweepRow>> {
    if table.header != SWEEP_HEADER {
        return Err(Error::validation("not a sweep table"));
    }
    Ok(table
        .rows
        .iter()
        .map(|(text, v)| SweepRow {
            state: text[0].clone(),
            p: v[0],
            predicted_f: v[1],
            predicted_f_m: v[2],
            mc_f: v[3],
            mc_sigma_f: v[4],
            acceptance: v[5],
        })
        .collect())
}

/// Closed-form fidelity of the recovery protocol for a pure input.
pub fn predicted_fidelity(initial: &PureState, p: f64, epsilon: f64) -> Result<f64> {
    let rho = initial.density_matrix();
    fidelity(&rho, &recover_rp_prime(&rho, p, epsilon)?.state)
}

/// Single-projection fidelity; equal to 1 for `|0>` at any `p`.
pub fn predicted_fidelity_m(initial: &PureState, p: f64) -> Result<f64> {
    let (a, b) = (initial.amplitude(0), initial.amplitude(1));
    if p >= 1.0 && b.norm_sqr() < 1.0 {
        return Ok(1.0);
    }
    pure_fidelity_fm(a, b, p)
}

#[derive(Clone)]
struct CellCounts {
    records: Vec<CountRecord>,
    shots: u64,
    accepted: u64,
}

fn tomography_counts(
    cfg: &ExperimentConfig,
    initial: InputState,
    p: f64,
    stage: Stage,
    shots: u64,
    seed: u64,
) -> Result<CellCounts> {
    let noise = cfg.noise_model()?;
    let per_axis = shots.div_ceil(3).max(1);
    let mut out = CellCounts {
        records: Vec::with_capacity(3),
        shots: 0,
        accepted: 0,
    };
    for axis in Axis::ALL {
        let seq = build_fig2_sequence(initial, p, cfg.epsilon, axis, &cfg.sequence_options(stage))?;
        let stats = run_batch(&seq, &noise, per_axis, derive_seed(seed, &[axis.index() as u64]))?;
        if stats.accepted == 0 {
            return Err(Error::DegenerateHerald { probability: 0.0 });
        }
        out.records.push(stats.count_record(axis)?);
        out.shots += stats.shots;
        out.accepted += stats.accepted;
    }
    Ok(out)
}

/// For every state and `p`: closed-form predictions, and a simulated
/// tomography estimate of the fidelity against the simulated `p = 0` reference.
pub fn sweep_p(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let states = cfg.input_states()?;
    let mut rows = Vec::new();
    for (si, &initial) in states.iter().enumerate() {
        let psi = initial.pure_state();
        let base_seed = derive_seed(cfg.seed, &[si as u64, u64::MAX]);
        let reference = tomography_counts(cfg, initial, 0.0, Stage::Full, cfg.shots_for(0.0), base_seed)?;
        for (pi, &p) in cfg.p_values.iter().enumerate() {
            let cell_seed = derive_seed(cfg.seed, &[si as u64, pi as u64]);
            // at p = 0 the reference run is the measurement itself
            let counts = if p == 0.0 {
                reference.clone()
            } else {
                tomography_counts(cfg, initial, p, Stage::Full, cfg.shots_for(p), cell_seed)?
            };
            let est = pair_fidelity_with_errorbars(
                &reference.records,
                &counts.records,
                cfg.n_bootstrap,
                derive_seed(cell_seed, &[7]),
            )?;
            rows.push(SweepRow {
                state: initial.label().to_string(),
                p: round_sig(p),
                predicted_f: round_sig(predicted_fidelity(&psi, p, cfg.epsilon)?),
                predicted_f_m: round_sig(predicted_fidelity_m(&psi, p)?),
                mc_f: round_sig(est.point),
                mc_sigma_f: round_sig(est.sigma),
                acceptance: round_sig(counts.accepted as f64 / counts.shots as f64),
            });
        }
    }
    Ok(rows)
}

pub const MIN_NODES: usize = 100;
/// Largest lattice tried by [`average_fidelity_converged`].
pub const MAX_NODES: usize = 640_000;
pub const CONVERGENCE_TOL: f64 = 1e-4;

/// Fibonacci lattice of `n` nearly uniform points on the sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<BlochVector> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            BlochVector { x: r * phi.cos(), y: r * phi.sin(), z }
        })
        .collect()
}

fn random_sphere(n: usize, seed: u64) -> Vec<BlochVector> {
    let mut rng = stream(seed, 0);
    (0..n)
        .map(|_| {
            random_pure_state(&mut rng)
                .density_matrix()
                .bloch_vector()
                .expect("qubit")
        })
        .collect()
}

fn protocol_output(rho: &DensityMatrix, p: f64, protocol: Protocol, epsilon: f64) -> Result<HeraldedResult> {
    match protocol {
        Protocol::M => partial_measure_mp(rho, p),
        Protocol::Rprime => recover_rp_prime(rho, p, epsilon),
    }
}

/// Mean fidelity of the protocol output with its pure input over the sphere.
pub fn average_fidelity(
    p: f64,
    protocol: Protocol,
    epsilon: f64,
    quadrature: Quadrature,
    weighting: Weighting,
) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::validation(format!("p = {p} is outside [0, 1)")));
    }
    check_unit_interval("epsilon", epsilon)?;
    let nodes = match quadrature {
        Quadrature::Fibonacci(n) | Quadrature::Random { n, .. } if n < MIN_NODES => {
            return Err(Error::validation(format!("need at least {MIN_NODES} quadrature nodes")));
        }
        Quadrature::Fibonacci(n) => fibonacci_sphere(n),
        Quadrature::Random { n, seed } => random_sphere(n, seed),
    };
    let terms = nodes
        .par_iter()
        .map(|b| {
            let rho = b.to_density_matrix();
            let out = protocol_output(&rho, p, protocol, epsilon)?;
            let f = fidelity(&rho, &out.state)?;
            let w = match weighting {
                Weighting::Uniform => 1.0,
                Weighting::Heralded => out.success_prob,
            };
            Ok((w * f, w))
        })
        .collect::<Result<Vec<_>>>()?;
    // sequential sum keeps the result independent of the thread count
    let (num, den) = terms.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AverageResult {
    pub value: f64,
    pub nodes: usize,
    /// Change from the lattice with a quarter of the nodes.
    pub delta: f64,
}

/// Fibonacci average, quadrupling the lattice from `start_nodes` until two
/// successive values agree within [`CONVERGENCE_TOL`].
pub fn average_fidelity_converged(
    p: f64,
    protocol: Protocol,
    epsilon: f64,
    weighting: Weighting,
    start_nodes: usize,
) -> Result<AverageResult> {
    let mut n = start_nodes.max(MIN_NODES);
    let mut prev = average_fidelity(p, protocol, epsilon, Quadrature::Fibonacci(n), weighting)?;
    while n * 4 <= MAX_NODES {
        n *= 4;
        let value = average_fidelity(p, protocol, epsilon, Quadrature::Fibonacci(n), weighting)?;
        let delta = (value - prev).abs();
        if delta <= CONVERGENCE_TOL {
            return Ok(AverageResult { value, nodes: n, delta });
        }
        prev = value;
    }
    Err(Error::Accuracy(format!(
        "average fidelity did not converge within {MAX_NODES} nodes"
    )))
}

/// Ideal recovery applied `n` times over a leak interval of strength `gamma_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RepeatedRecovery {
    pub n: usize,
    pub p_segment: f64,
    pub success_prob: f64,
    pub asymptote: f64,
}

pub fn repeated_recovery(gamma_t: f64, n: usize) -> Result<RepeatedRecovery> {
    if !(gamma_t >= 0.0 && gamma_t.is_finite()) {
        return Err(Error::validation("gamma_t must be finite and >= 0"));
    }
    if n == 0 {
        return Err(Error::validation("n must be >= 1"));
    }
    let half_segment = gamma_t / (2.0 * n as f64);
    let survive = (-half_segment).exp();
    Ok(RepeatedRecovery {
        n,
        p_segment: -(-half_segment).exp_m1(),
        success_prob: survive.powi(n as i32),
        asymptote: (-gamma_t / 2.0).exp(),
    })
}

/// Runs `n` ideal recoveries on `rho` one after another; returns the final
/// state and the product of the success probabilities.
pub fn iterate_recovery(rho: &DensityMatrix, p_segment: f64, n: usize) -> Result<HeraldedResult> {
    let mut state = rho.clone();
    let mut success = 1.0;
    for _ in 0..n {
        let r = recover_rp(&state, p_segment)?;
        success *= r.success_prob;
        state = r.state;
    }
    Ok(HeraldedResult {
        state,
        success_prob: success,
    })
}

/// Monte Carlo acceptance of `n` repeated recoveries and its binomial error.
pub fn repeated_recovery_mc(
    gamma_t: f64,
    n: usize,
    initial: InputState,
    shots: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let r = repeated_recovery(gamma_t, n)?;
    let seq = build_repeated_recovery_sequence(initial, r.p_segment, 0.0, n, Axis::Z)?;
    let stats = run_batch(&seq, &NoiseModel::none(), shots, seed)?;
    Ok((stats.acceptance_fraction(), stats.acceptance_sigma()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DfsResult {
    pub fidelity: f64,
    pub survival: f64,
}

fn leak_kraus(p: f64) -> [ComplexMatrix; 2] {
    let mut keep = ComplexMatrix::identity(3);
    keep[(1, 1)] = c64((1.0 - p).sqrt(), 0.0);
    [keep, ComplexMatrix::unit(3, 2, 1, p.sqrt())]
}

/// Independent leakage on both qubits of `a|01> + b|10>`, post-selected on
/// both staying in the computational space.
pub fn dfs_two_qubit(p: f64, a: C64, b: C64) -> Result<DfsResult> {
    check_unit_interval("p", p)?;
    let logical = PureState::qubit(a, b)?;
    let zero = c64(0.0, 0.0);
    let mut amps9 = vec![zero; 9];
    amps9[1] = a; // |0>|1>
    amps9[3] = b; // |1>|0>
    let rho = PureState::new(amps9)?.density_matrix();
    let kraus = leak_kraus(p);
    let mut out = ComplexMatrix::zeros(9);
    for k1 in &kraus {
        for k2 in &kraus {
            out = &out + &k1.kron(k2)?.conjugate(rho.matrix());
        }
    }
    // computational subspace: indices 3i + j with i, j < 2
    let keep = [0, 1, 3, 4];
    let mut block = ComplexMatrix::zeros(4);
    for (r, &i) in keep.iter().enumerate() {
        for (c, &j) in keep.iter().enumerate() {
            block[(r, c)] = out[(i, j)];
        }
    }
    let (state, survival) = DensityMatrix::normalized_from(block)?;
    let mut target = vec![zero; 4];
    target[1] = logical.amplitude(0);
    target[2] = logical.amplitude(1);
    let target = PureState::new(target)?.density_matrix();
    Ok(DfsResult {
        fidelity: fidelity(&target, &state)?,
        survival,
    })
}

/// Bloch points of one state across the `p` grid: simulated tomography and
/// the deterministic prediction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomoTrace {
    pub state: String,
    pub stage: String,
    pub p: Vec<f64>,
    pub measured: Vec<[f64; 3]>,
    pub predicted: Vec<[f64; 3]>,
}

pub fn tomo_demo(cfg: &ExperimentConfig) -> Result<Vec<TomoTrace>> {
    cfg.validate()?;
    let noise = cfg.noise_model()?;
    let offset = noise.deterministic_phase();
    let mut traces = Vec::new();
    for (si, initial) in cfg.input_states()?.into_iter().enumerate() {
        for (stage_idx, (stage, name)) in [(Stage::MidCollapse, "mid"), (Stage::Full, "recovered")]
            .into_iter()
            .enumerate()
        {
            let mut trace = TomoTrace {
                state: initial.label().to_string(),
                stage: name.to_string(),
                p: Vec::new(),
                measured: Vec::new(),
                predicted: Vec::new(),
            };
            for (pi, &p) in cfg.p_values.iter().enumerate() {
                let seed = derive_seed(cfg.seed, &[si as u64, stage_idx as u64, pi as u64]);
                let counts = tomography_counts(cfg, initial, p, stage, cfg.shots_for(p), seed)?;
                let b = crate::tomography::estimate_bloch(&counts.records)?;
                let seq = build_fig2_sequence(initial, p, cfg.epsilon, Axis::Z, &cfg.sequence_options(stage))?;
                let exact = conditioned_evolution(&seq, &noise, offset)?.state.bloch_vector()?;
                trace.p.push(round_sig(p));
                trace.measured.push(b.components().map(round_sig));
                trace.predicted.push(exact.components().map(round_sig));
            }
            traces.push(trace);
        }
    }
    Ok(traces)
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    results: T,
}

fn write_record<T: Serialize>(cfg: &ExperimentConfig, dir: &Path, results: T) -> Result<PathBuf> {
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        seed: cfg.seed,
        config: cfg,
        results,
    };
    let path = dir.join(format!("{}.json", cfg.experiment.name()));
    write_text(&path, &to_json(&record)?)?;
    Ok(path)
}

fn point(v: [f64; 3]) -> BlochVector {
    BlochVector { x: v[0], y: v[1], z: v[2] }
}

#[derive(Serialize)]
struct AverageSummary {
    p: f64,
    protocol: Protocol,
    weighting: Weighting,
    value: f64,
    nodes: usize,
    delta: f64,
}

#[derive(Serialize)]
struct RepeatSummary {
    closed_form: RepeatedRecovery,
    iterated_success: f64,
    iterated_fidelity: f64,
    mc_acceptance: f64,
    mc_sigma: f64,
}

#[derive(Serialize)]
struct DfsSummary {
    p: f64,
    samples: usize,
    min_fidelity: f64,
    max_survival_error: f64,
}

/// Runs the configured experiment and writes its outputs under
/// `output_path`; returns the written paths.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output_path);
    let mut written = Vec::new();
    match cfg.experiment {
        ExperimentKind::Sweep => {
            let rows = sweep_p(cfg)?;
            let csv = dir.join("sweep.csv");
            write_text(&csv, &sweep_table(&rows)?.to_csv()?)?;
            written.push(csv);
            written.push(write_record(cfg, &dir, &rows)?);
            let series: Vec<_> = cfg
                .input_states()?
                .iter()
                .map(|s| BlochSeries {
                    label: format!("{} predicted", s.label()),
                    points: cfg
                        .p_values
                        .iter()
                        .filter_map(|&p| {
                            let rho = s.pure_state().density_matrix();
                            recover_rp_prime(&rho, p, cfg.epsilon).ok()?.state.bloch_vector().ok()
                        })
                        .collect(),
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            let svg = dir.join("sweep.svg");
            write_bloch_svg(&svg, "recovered states (predicted)", &series)?;
            written.push(svg);
        }
        ExperimentKind::Average => {
            let mut table = Table::new(&["protocol", "p", "average_F", "nodes", "delta"], 1);
            let mut summary = Vec::new();
            for &p in &cfg.p_values {
                if p >= 1.0 {
                    continue;
                }
                for protocol in [Protocol::M, Protocol::Rprime] {
                    let r = average_fidelity_converged(
                        p,
                        protocol,
                        cfg.epsilon,
                        cfg.weighting,
                        cfg.quadrature_nodes,
                    )?;
                    let label = match protocol {
                        Protocol::M => "M",
                        Protocol::Rprime => "Rprime",
                    };
                    let value = round_sig(r.value);
                    table.push(
                        vec![label.to_string()],
                        vec![round_sig(p), value, r.nodes as f64, round_sig(r.delta)],
                    )?;
                    summary.push(AverageSummary {
                        p: round_sig(p),
                        protocol,
                        weighting: cfg.weighting,
                        value,
                        nodes: r.nodes,
                        delta: round_sig(r.delta),
                    });
                }
            }
            let csv = dir.join("average.csv");
            write_text(&csv, &table.to_csv()?)?;
            written.push(csv);
            written.push(write_record(cfg, &dir, &summary)?);
        }
        ExperimentKind::Repeat => {
            let mut table = Table::new(
                &["n", "p_segment", "success", "asymptote", "mc_acceptance", "mc_sigma"],
                0,
            );
            let mut summary = Vec::new();
            let probe = PureState::plus_x().density_matrix();
            for (k, &n) in cfg.repeats.iter().enumerate() {
                let r = repeated_recovery(cfg.gamma_t, n)?;
                let iterated = iterate_recovery(&probe, r.p_segment, n)?;
                let shots = cfg.shots.unwrap_or(100_000);
                let (mc, sigma) = repeated_recovery_mc(
                    cfg.gamma_t,
                    n,
                    InputState::PlusX,
                    shots,
                    derive_seed(cfg.seed, &[k as u64]),
                )?;
                table.push(
                    vec![],
                    vec![
                        n as f64,
                        round_sig(r.p_segment),
                        round_sig(r.success_prob),
                        round_sig(r.asymptote),
                        round_sig(mc),
                        round_sig(sigma),
                    ],
                )?;
                summary.push(RepeatSummary {
                    closed_form: r,
                    iterated_success: round_sig(iterated.success_prob),
                    iterated_fidelity: round_sig(fidelity(&probe, &iterated.state)?),
                    mc_acceptance: round_sig(mc),
                    mc_sigma: round_sig(sigma),
                });
            }
            let csv = dir.join("repeat.csv");
            write_text(&csv, &table.to_csv()?)?;
            written.push(csv);
            written.push(write_record(cfg, &dir, &summary)?);
        }
        ExperimentKind::Dfs => {
            let mut table = Table::new(&["p", "min_fidelity", "max_survival_error"], 0);
            let mut summary = Vec::new();
            for (pi, &p) in cfg.p_values.iter().enumerate() {
                let mut rng = stream(derive_seed(cfg.seed, &[pi as u64]), 0);
                let mut min_f: f64 = 1.0;
                let mut max_err: f64 = 0.0;
                for _ in 0..cfg.dfs_samples {
                    let psi = random_pure_state(&mut rng);
                    match dfs_two_qubit(p, psi.amplitude(0), psi.amplitude(1)) {
                        Ok(r) => {
                            min_f = min_f.min(r.fidelity);
                            max_err = max_err.max((r.survival - (1.0 - p)).abs());
                        }
                        Err(Error::DegenerateHerald { .. }) if p >= 1.0 => {}
                        Err(e) => return Err(e),
                    }
                }
                table.push(vec![], vec![round_sig(p), round_sig(min_f), round_sig(max_err)])?;
                summary.push(DfsSummary {
                    p: round_sig(p),
                    samples: cfg.dfs_samples,
                    min_fidelity: round_sig(min_f),
                    max_survival_error: round_sig(max_err),
                });
            }
            let csv = dir.join("dfs.csv");
            write_text(&csv, &table.to_csv()?)?;
            written.push(csv);
            written.push(write_record(cfg, &dir, &summary)?);
        }
        ExperimentKind::TomoDemo => {
            let traces = tomo_demo(cfg)?;
            let mut table = Table::new(
                &["state", "stage", "p", "x", "y", "z", "pred_x", "pred_y", "pred_z"],
                2,
            );
            for t in &traces {
                for k in 0..t.p.len() {
                    let mut v = vec![t.p[k]];
                    v.extend(t.measured[k]);
                    v.extend(t.predicted[k]);
                    table.push(vec![t.state.clone(), t.stage.clone()], v)?;
                }
            }
            let csv = dir.join("tomo-demo.csv");
            write_text(&csv, &table.to_csv()?)?;
            written.push(csv);
            written.push(write_record(cfg, &dir, &traces)?);
            for stage in ["mid", "recovered"] {
                let series: Vec<_> = traces
                    .iter()
                    .filter(|t| t.stage == stage)
                    .map(|t| BlochSeries {
                        label: t.state.clone(),
                        points: t.measured.iter().copied().map(point).collect(),
                    })
                    .collect();
                let svg = dir.join(format!("tomo-{stage}.svg"));
                write_bloch_svg(&svg, &format!("{stage} states"), &series)?;
                written.push(svg);
            }
        }
    }
    Ok(written)
}
