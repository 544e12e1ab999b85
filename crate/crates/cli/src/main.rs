use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use cmv_cli::commands;
use cmv_cli::config::RunConfig;

/// Spectral toolkit for CMV operators with Sturmian coefficients.
#[derive(Parser, Debug)]
#[command(name = "cmv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file, key = value lines or a JSON object.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Parent directory for run directories.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of angles on the circle grid.
    #[arg(long, global = true, value_name = "N")]
    theta_count: Option<String>,
    /// Radii for dLambda_r, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    r: Option<String>,
    /// Arc half-widths, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    eps: Option<String>,
    /// Trace-map level.
    #[arg(long, global = true, value_name = "N")]
    depth: Option<String>,
    /// Index window for coefficient output.
    #[arg(long, global = true, value_name = "N")]
    window: Option<String>,
    /// Sturmian letters, `a,b`.
    #[arg(long, global = true, value_name = "a,b", allow_hyphen_values = true)]
    alphabet: Option<String>,
    /// Rotation frequency in (0, 1).
    #[arg(long, global = true, value_name = "W")]
    omega: Option<String>,
    /// Seed for randomized checks.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<String>,
    /// Check ids for `verify`, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    criteria: Option<String>,
    /// Extra `key=value` settings, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Write the Verblunsky coefficients on the index window.
    Coeffs,
    /// Trace-map spectrum approximants and Hölder constants.
    Spectrum,
    /// Densities of dLambda_r and arc masses.
    Measure,
    /// Hölder exponents of the spectral measure.
    Holder,
    /// Quantum-walk snapshots of E^k delta_0.
    Walk,
    /// Run the acceptance checks; exits nonzero on failure.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Spectrum => "spectrum",
            Command::Measure => "measure",
            Command::Holder => "holder",
            Command::Walk => "walk",
            Command::Verify => "verify",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        config.load_file(path)?;
    }
    let flags = [
        ("theta_count", &cli.theta_count),
        ("r", &cli.r),
        ("eps", &cli.eps),
        ("depth", &cli.depth),
        ("window", &cli.window),
        ("alphabet", &cli.alphabet),
        ("omega", &cli.omega),
        ("seed", &cli.seed),
        ("criteria", &cli.criteria),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            config.set(key, v)?;
        }
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got '{kv}'"))?;
        config.set(k, v)?;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<bool> {
    let config = resolve(cli)?;
    let dir = commands::create_run_dir(&config, cli.command.name())?;
    println!("run directory: {}", dir.display());
    println!("{}", serde_json::to_string_pretty(&config)?);
    match cli.command {
        Command::Coeffs => commands::cmd_coeffs(&config, &dir)?,
        Command::Spectrum => commands::cmd_spectrum(&config, &dir)?,
        Command::Measure => commands::cmd_measure(&config, &dir)?,
        Command::Holder => {
            for r in commands::cmd_holder(&config, &dir)? {
                println!(
                    "theta = {:.6}  beta_hat = {:.4}  envelope = {:.4}  predicted = {:.4}",
                    r.theta, r.beta_hat, r.envelope_beta, r.gamma_cross_check
                );
            }
        }
        Command::Walk => commands::cmd_walk(&config, &dir)?,
        Command::Verify => return Ok(commands::cmd_verify(&config, &dir)?.passed),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
