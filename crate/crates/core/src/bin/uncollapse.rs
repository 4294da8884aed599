use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uncollapse::experiment::{ExperimentConfig, ExperimentKind, NoiseKind, Weighting};
use uncollapse::output::read_text;
use uncollapse::{Error, Result};

#[derive(Parser)]
#[command(name = "uncollapse", version, about = "Heralded recovery from partial collapse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted and simulated recovery fidelity over the p grid
    Sweep(Overrides),
    /// Fidelity averaged over the Bloch sphere
    Average(Overrides),
    /// Success probability of repeated recoveries
    Repeat(Overrides),
    /// Two-qubit encoding under independent leakage
    Dfs(Overrides),
    /// Simulated tomography of mid-sequence and recovered states
    TomoDemo(Overrides),
}

#[derive(Args, Default)]
struct Overrides {
    /// Flat JSON config file; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    p_values: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    states: Option<Vec<String>>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    phi_width: Option<f64>,
    #[arg(long)]
    phi_offset: Option<f64>,
    #[arg(long)]
    pi_pulse_angle_error: Option<f64>,
    #[arg(long)]
    cpmg: Option<bool>,
    #[arg(long)]
    deshelve_dwell: Option<f64>,
    #[arg(long)]
    n_bootstrap: Option<usize>,
    #[arg(long)]
    quadrature_nodes: Option<usize>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[arg(long)]
    gamma_t: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    repeats: Option<Vec<usize>>,
    #[arg(long)]
    dfs_samples: Option<usize>,
    #[arg(long)]
    output_path: Option<String>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum NoiseArg {
    None,
    Gaussian,
    Uniform,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WeightingArg {
    Uniform,
    Heralded,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($field:ident),*) => {
        $(if let Some(v) = $o.$field { $cfg.$field = v; })*
    };
}

fn build_config(kind: ExperimentKind, o: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = read_text(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
            if let Some(named) = value.get("experiment").and_then(|v| v.as_str()) {
                if named != kind.name() {
                    return Err(Error::Validation(format!(
                        "config is for '{named}' but the subcommand is '{}'",
                        kind.name()
                    )));
                }
            }
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(n) = o.shots {
        cfg.shots = Some(n);
    }
    if let Some(n) = o.noise {
        cfg.noise = match n {
            NoiseArg::None => NoiseKind::None,
            NoiseArg::Gaussian => NoiseKind::Gaussian,
            NoiseArg::Uniform => NoiseKind::Uniform,
        };
    }
    if let Some(w) = o.weighting {
        cfg.weighting = match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::Heralded => Weighting::Heralded,
        };
    }
    apply!(
        cfg, o, p_values, epsilon, seed, states, phi_width, phi_offset, pi_pulse_angle_error,
        cpmg, deshelve_dwell, n_bootstrap, quadrature_nodes, gamma_t, repeats, dfs_samples,
        output_path
    );
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, overrides) = match cli.command {
        Command::Sweep(o) => (ExperimentKind::Sweep, o),
        Command::Average(o) => (ExperimentKind::Average, o),
        Command::Repeat(o) => (ExperimentKind::Repeat, o),
        Command::Dfs(o) => (ExperimentKind::Dfs, o),
        Command::TomoDemo(o) => (ExperimentKind::TomoDemo, o),
    };
    let result = build_config(kind, overrides).and_then(|cfg| uncollapse::experiment::run(&cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
