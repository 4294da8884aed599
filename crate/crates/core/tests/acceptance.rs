//! Acceptance checks, one PASS/FAIL line per criterion. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uncollapse::experiment::{
    average_fidelity, dfs_two_qubit, predicted_fidelity, predicted_fidelity_m,
    repeated_recovery, repeated_recovery_mc, rows_from_table, run, ExperimentConfig, Protocol,
    Quadrature, Weighting,
};
use uncollapse::gates::Axis;
use uncollapse::output::{read_text, Table};
use uncollapse::random_states::{random_pure_state, random_qubit_state};
use uncollapse::rng::stream;
use uncollapse::tomography::{estimate_bloch, measurement_probability, reconstruct_from_probabilities, simulate_tomography};
use uncollapse::trajectory::{build_fig2_sequence, run_batch, InputState, NoiseModel, SequenceOptions};
use uncollapse::{
    fidelity, kraus_identity_check, pure_fidelity_fm, recover_rp, recover_rp_prime, Result,
    DensityMatrix, PureState, DEFAULT_BRANCHING_RATIO,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn random_cases(seed: u64, n: usize, p_max: f64) -> Vec<(DensityMatrix, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rho = random_qubit_state(&mut rng);
            (rho, rng.random_range(0.0..=p_max))
        })
        .collect()
}

fn recovery_identity() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (rho, p) in random_cases(1, 1000, 0.99) {
        worst = worst.max(recover_rp(&rho, p)?.state.trace_distance(&rho)?);
    }
    outcome(worst <= 1e-10, format!("max trace distance {worst:.3e}"))
}

fn herald_law() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (rho, p) in random_cases(1, 1000, 0.99) {
        worst = worst.max((recover_rp(&rho, p)?.success_prob - (1.0 - p)).abs());
    }
    let mut worst_z: f64 = 0.0;
    for (k, initial) in InputState::ALL.into_iter().enumerate() {
        for (j, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            let seq = build_fig2_sequence(initial, p, 0.0, Axis::Z, &SequenceOptions::default())?;
            let stats = run_batch(&seq, &NoiseModel::gaussian(0.2)?, 100_000, (10 * k + j) as u64)?;
            let sigma = (p * (1.0 - p) / 100_000.0).sqrt();
            worst_z = worst_z.max((stats.acceptance_fraction() - (1.0 - p)).abs() / sigma);
        }
    }
    outcome(
        worst <= 1e-12 && worst_z <= 3.0,
        format!("max |P - (1-p)| {worst:.3e}; MC worst deviation {worst_z:.2} sigma"),
    )
}

fn sphere_averages() -> Result<Outcome> {
    let q = Quadrature::Fibonacci(10_000);
    let m = average_fidelity(0.8, Protocol::M, 0.0, q, Weighting::Heralded)?;
    let r = average_fidelity(0.8, Protocol::Rprime, DEFAULT_BRANCHING_RATIO, q, Weighting::Heralded)?;
    let r_uniform =
        average_fidelity(0.8, Protocol::Rprime, DEFAULT_BRANCHING_RATIO, q, Weighting::Uniform)?;
    outcome(
        (m - 0.956).abs() <= 1e-3 && (r - 0.986).abs() <= 1e-3,
        format!(
            "M {m:.4} (target 0.956), R' {r:.4} (target 0.986, uniform weighting gives {r_uniform:.4})"
        ),
    )
}

fn axis_crossing() -> Result<Outcome> {
    let eps = DEFAULT_BRANCHING_RATIO;
    let zero = PureState::zero().density_matrix();
    let z = |p: f64| -> Result<f64> { Ok(recover_rp_prime(&zero, p, eps)?.state.bloch_vector()?.z) };
    let (mut lo, mut hi) = (0.5, 0.999);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if z(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let target = 1.0 / (1.0 + eps);
    outcome((root - target).abs() <= 1e-6, format!("root {root:.8} vs 1/(1+eps) {target:.8}"))
}

fn infidelity_order() -> Result<Outcome> {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let pts: Vec<(f64, f64)> = (0..=90)
        .map(|k| {
            let p = 1e-3 + 1e-4 * k as f64;
            Ok((p, (1.0 - pure_fidelity_fm(a, a, p)?) / (p * p)))
        })
        .collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|v| v.0).sum::<f64>() / n;
    let my = pts.iter().map(|v| v.1).sum::<f64>() / n;
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    let intercept = my - slope * mx;
    let rel = (intercept * 32.0 - 1.0).abs();
    outcome(rel <= 0.01, format!("intercept {intercept:.6} vs 1/32, rel err {rel:.2e}"))
}

fn kraus_identity() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_qubit_state(&mut rng);
        let p = rng.random_range(0.0..0.99);
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        worst = worst.max(kraus_identity_check(&rho, p, phi)?);
    }
    outcome(worst <= 1e-10, format!("max deviation {worst:.3e}"))
}

fn asymptotic_success() -> Result<Outcome> {
    let r = repeated_recovery(1.0, 1000)?;
    let err = (r.success_prob - (-0.5f64).exp()).abs();
    let (acc, sigma) = repeated_recovery_mc(1.0, 1000, InputState::PlusX, 100_000, 7)?;
    let z = (acc - r.success_prob).abs() / sigma;
    outcome(
        err <= 1e-12 && z <= 3.0,
        format!("closed form error {err:.3e}; MC {acc:.5} is {z:.2} sigma from e^-1/2"),
    )
}

fn dfs_check() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut f_err, mut s_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let psi = random_pure_state(&mut rng);
        for k in 0..=19 {
            let p = 0.05 * k as f64;
            let r = dfs_two_qubit(p, psi.amplitude(0), psi.amplitude(1))?;
            f_err = f_err.max((r.fidelity - 1.0).abs());
            s_err = s_err.max((r.survival - (1.0 - p)).abs());
        }
    }
    outcome(
        f_err <= 1e-12 && s_err <= 1e-12,
        format!("max |F - 1| {f_err:.3e}, max |survival - (1-p)| {s_err:.3e}"),
    )
}

fn tomography_consistency() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact: f64 = 0.0;
    for _ in 0..500 {
        let rho = random_qubit_state(&mut rng);
        let probs = Axis::ALL.map(|a| measurement_probability(&rho, a).unwrap());
        exact = exact.max(reconstruct_from_probabilities(probs)?.trace_distance(&rho)?);
    }
    let mut worst_std: f64 = 0.0;
    for initial in InputState::ALL {
        let truth = recover_rp(&initial.pure_state().density_matrix(), 0.5)?.state;
        let infid: Vec<f64> = (0..500u64)
            .map(|k| {
                let mut s = stream(900 + initial as u64, k);
                let records = simulate_tomography(&truth, 12_000, &mut s)?;
                Ok(1.0 - fidelity(&truth, &estimate_bloch(&records)?.to_density_matrix())?)
            })
            .collect::<Result<_>>()?;
        let mean = infid.iter().sum::<f64>() / infid.len() as f64;
        let var = infid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (infid.len() - 1) as f64;
        worst_std = worst_std.max(var.sqrt());
    }
    outcome(
        exact <= 1e-12 && worst_std <= 0.015,
        format!("noiseless error {exact:.3e}; worst infidelity std {worst_std:.2e}"),
    )
}

fn sweep_reproduction() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(|e| uncollapse::Error::Validation(e.to_string()))?;
    let cfg = ExperimentConfig {
        output_path: dir.path().to_string_lossy().into_owned(),
        ..Default::default()
    };
    run(&cfg)?;
    let rows = rows_from_table(&Table::from_csv(&read_text(&dir.path().join("sweep.csv"))?, 1)?)?;
    let inside = rows.iter().filter(|r| r.within(3.0)).count();
    let mut ordered = true;
    for r in rows.iter().filter(|r| (r.state == "x" || r.state == "y") && r.p >= 0.5) {
        ordered &= r.predicted_f > r.predicted_f_m;
    }
    // the CSV predictions must match a fresh evaluation
    let mut worst_pred: f64 = 0.0;
    for r in &rows {
        let psi = r.state.parse::<InputState>()?.pure_state();
        worst_pred = worst_pred.max((predicted_fidelity(&psi, r.p, cfg.epsilon)? - r.predicted_f).abs());
        worst_pred = worst_pred.max((predicted_fidelity_m(&psi, r.p)? - r.predicted_f_m).abs());
    }
    outcome(
        rows.len() == 40 && inside * 100 >= 95 * rows.len() && ordered && worst_pred <= 1e-11,
        format!(
            "{inside}/{} cells within 3 sigma; R' > M for x,y at p >= 0.5: {ordered}",
            rows.len()
        ),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Result<Outcome>, Duration); 10] = [
        ("recovery identity", recovery_identity, Duration::from_secs(1)),
        ("herald law", herald_law, Duration::from_secs(10)),
        ("sphere averages", sphere_averages, Duration::from_secs(5)),
        ("axis crossing", axis_crossing, Duration::from_secs(60)),
        ("infidelity order", infidelity_order, Duration::from_secs(60)),
        ("kraus identity", kraus_identity, Duration::from_secs(60)),
        ("asymptotic success", asymptotic_success, Duration::from_secs(60)),
        ("dfs check", dfs_check, Duration::from_secs(60)),
        ("tomography consistency", tomography_consistency, Duration::from_secs(60)),
        ("sweep reproduction", sweep_reproduction, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({detail}; {:.2}s, budget {}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
