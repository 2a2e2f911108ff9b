//! `clusterpovm` command-line harness.
//!
//! Exit status: 0 on success, 1 on a validation failure or error, 2 when a
//! run has more failed reconstructions than its configured threshold.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use clusterpovm::experiment::{calibrate_noise, generate_settings, monte_carlo, run_experiment, ExperimentConfig};
use clusterpovm::mbqc::check_oracle_triangle;
use clusterpovm::povm::{self, optics, Povm};

#[derive(Parser)]
#[command(name = "clusterpovm", version, about = "Simulated cluster-state POVM computation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the measurement settings (six eigenstates plus a Fibonacci lattice) as CSV.
    GenerateSettings {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulated experiment and write report.csv, summary.json and histogram.csv.
    Run {
        /// JSON configuration; defaults are used for missing fields or when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides `output_dir` from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat the experiment with seeds `seed, seed + 1, ...` and aggregate.
    MonteCarlo {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the POVM diagnostics for one setting as JSON.
    ValidatePovm {
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, value_enum, default_value_t = PovmForm::Experimental)]
        form: PovmForm,
    },
    /// Compare circuit, projective chain and POVM computation on a (phi, theta) grid.
    OracleCheck {
        #[arg(long, default_value_t = 15)]
        grid: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Fit the noise model to a target purity and Bell fidelity.
    Calibrate {
        #[arg(long, default_value_t = clusterpovm::experiment::TARGET_RESOURCE_PURITY)]
        purity: f64,
        #[arg(long, default_value_t = clusterpovm::experiment::TARGET_RESOURCE_FIDELITY)]
        fidelity: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PovmForm {
    Experimental,
    Chi,
    Ancilla,
    Optical,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn output_dir(out: Option<PathBuf>, config: &ExperimentConfig, fallback: &str) -> PathBuf {
    out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from(fallback))
}

fn build_povm(form: PovmForm, phi: f64, theta: f64) -> Povm {
    match form {
        PovmForm::Experimental => povm::povm_experimental(phi, theta),
        PovmForm::Chi => povm::povm_chi(phi, povm::parameter_map(theta)),
        PovmForm::Ancilla => povm::povm_from_ancilla(phi, povm::parameter_map(theta)),
        PovmForm::Optical => optics::optical_model_povm(phi, theta),
    }
}

fn grid(n: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::PI;
    let step = |k: usize| if n > 1 { k as f64 / (n - 1) as f64 } else { 0.5 };
    (0..n).flat_map(|i| (0..n).map(move |j| (PI * step(i), -PI + 2.0 * PI * step(j)))).collect()
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenerateSettings { n, out } => {
            let set = generate_settings(n);
            set.write_csv(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
            eprintln!("wrote {} settings to {}", set.len(), out.display());
        }
        Command::Run { config, out, seed } => {
            let config = load_config(config.as_deref(), seed)?;
            let dir = output_dir(out, &config, "report");
            let report = run_experiment(&config)?;
            report.write_to_dir(&dir)?;
            println!("{}", report.summary_json()?);
            if report.failures_exceed_threshold() {
                eprintln!(
                    "{} of {} reconstructions failed (threshold {})",
                    report.summary.n_failed, report.summary.n_settings, config.failure_threshold
                );
                return Ok(ExitCode::from(2));
            }
        }
        Command::MonteCarlo { trials, config, out, seed } => {
            let config = load_config(config.as_deref(), seed)?;
            let dir = output_dir(out, &config, "monte_carlo");
            let summary = monte_carlo(&config, trials)?;
            summary.write_to_dir(&dir)?;
            let brief = serde_json::json!({
                "trials": summary.trials,
                "total_failed": summary.total_failed,
                "fidelity_measured": { "mean": summary.fidelity_measured.mean, "std": summary.fidelity_measured.std },
                "fidelity_expected": { "mean": summary.fidelity_expected.mean, "std": summary.fidelity_expected.std },
                "infidelity_expected_measured": {
                    "mean": summary.infidelity_expected_measured.mean,
                    "std": summary.infidelity_expected_measured.std,
                },
            });
            println!("{}", serde_json::to_string_pretty(&brief)?);
            if summary.runs.iter().any(|r| r.n_failed > config.failure_threshold) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::ValidatePovm { phi, theta, form } => {
            let diagnostics = povm::validate(&build_povm(form, phi, theta))?;
            println!("{}", serde_json::to_string_pretty(&diagnostics)?);
            if !diagnostics.passes {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::OracleCheck { grid: n, tol } => {
            if n == 0 {
                bail!("grid must have at least one point per axis");
            }
            let mut failures = Vec::new();
            let points = grid(n);
            for &(phi, theta) in &points {
                let check = check_oracle_triangle(phi, theta)?;
                if !check.passes(tol) {
                    failures.push(check);
                }
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "points": points.len(),
                    "tolerance": tol,
                    "failures": failures,
                }))?
            );
            if !failures.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Calibrate { purity, fidelity } => {
            println!("{}", serde_json::to_string_pretty(&calibrate_noise(purity, fidelity))?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
