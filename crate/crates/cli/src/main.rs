use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

mod commands;
mod figures;
mod reference;

#[derive(Parser, Debug)]
#[command(
    name = "flyqubit",
    version,
    about = "Fidelity bounds, pulse optimization and drive synthesis for stimulated Raman photon emission"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Parameter file (JSON, frequencies in GHz). Defaults to the SiV set with Γ₁ = Γ₂ = 0.1γ.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Verify the results and exit with status 3 on a failed check.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Efficiency bound of one pulse plus the sin² duration sweep.
    Bound(BoundArgs),
    /// Grid search for the optimal cosine-series pulse.
    Optimize(OptimizeArgs),
    /// Closed-form amplitudes and drive for a target efficiency.
    Trajectory(TrajectoryArgs),
    /// Synthesis, ODE integration and master equation for a request file.
    Verify(VerifyArgs),
    /// Gate-level replay of a time-bin or entanglement circuit.
    Protocol(ProtocolArgs),
    /// Regenerates every figure and table artifact.
    Figures(FiguresArgs),
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    /// Pulse file (JSON); defaults to a sin² pulse of 0.44 ns.
    #[arg(long)]
    pub pulse: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub t_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 121)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    Full,
    Desk,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long = "L", default_value_t = 1)]
    pub order: usize,
    /// Enforce f̈(0) = f̈(T) = 0.
    #[arg(long)]
    pub constrained: bool,
    #[arg(long, value_enum, default_value_t = Grid::Desk)]
    pub grid: Grid,
    /// Local refinement after the grid search (on by default for desk grids beyond L = 2).
    #[arg(long)]
    pub refine: Option<bool>,
    /// Drive target as a fraction of E_max for the Ω(t) export.
    #[arg(long, default_value_t = 0.99)]
    pub s: f64,
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub pulse: Option<PathBuf>,
    /// Target efficiency as a fraction of E_max.
    #[arg(long, default_value_t = 0.99, conflicts_with = "efficiency")]
    pub s: f64,
    /// Absolute target efficiency.
    #[arg(long = "E")]
    pub efficiency: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha0_sq: f64,
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Synthesis request (params, pulse, E or s); built from --params and --pulse when absent.
    #[arg(long)]
    pub request: Option<PathBuf>,
    #[arg(long)]
    pub pulse: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub which: String,
    /// α₀ as `re` or `re,im`.
    #[arg(long, value_parser = parse_complex, default_value = "0.7071067811865476")]
    pub alpha0: Complex64,
    #[arg(long, value_parser = parse_complex, default_value = "0.7071067811865476")]
    pub beta0: Complex64,
    #[arg(long = "E", default_value_t = 1.0)]
    pub efficiency: f64,
}

#[derive(Args, Debug)]
pub struct FiguresArgs {
    #[arg(long, value_enum, default_value_t = Grid::Desk)]
    pub grid: Grid,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re` or `re,im`, got '{s}'")),
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(flyqubit::Error),
    Check(Vec<String>),
}

impl From<flyqubit::Error> for CliError {
    fn from(e: flyqubit::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Bound(a) => commands::bound(&cli.common, a),
        Command::Optimize(a) => commands::optimize(&cli.common, a),
        Command::Trajectory(a) => commands::trajectory(&cli.common, a),
        Command::Verify(a) => commands::verify(&cli.common, a),
        Command::Protocol(a) => commands::protocol(&cli.common, a),
        Command::Figures(a) => figures::run(&cli.common, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
        Err(CliError::Check(failures)) => {
            for f in &failures {
                eprintln!("check failed: {f}");
            }
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("0.5").unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.6, -0.1").unwrap(), Complex64::new(0.6, -0.1));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn command_line_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
