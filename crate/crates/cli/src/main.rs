use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nldirac::BubbleParams;
use nldirac_cli::{emit_profile, run_families, write_csv, CliError, Family, Report, SuiteConfig};

#[derive(Parser)]
#[command(name = "nldirac", version, about = "Verify ground states of the critical nonlinear Dirac equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check.
    Verify(SuiteArgs),
    /// Grid residuals, convergence orders and nodal checks only.
    Residual(SuiteArgs),
    /// Action, lower bound and the scalar couplings only.
    Action(SuiteArgs),
    /// Green kernel checks only.
    Kernel(SuiteArgs),
    /// Write the radial profile of a bubble as CSV.
    Profile(ProfileArgs),
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report path; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Largest radius; 1000 lambda when absent.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 1001)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

fn write_report(report: &Report, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, report.to_json()).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn suite(args: &SuiteArgs, families: &[Family]) -> Result<bool, CliError> {
    let config = SuiteConfig::load(&args.config)?.with_env_seed()?;
    let report = run_families(&config, families)?;
    print!("{}", report.render_text());
    if let Some(path) = args.out.as_ref().or(config.output.report.as_ref()) {
        write_report(&report, path)?;
    }
    Ok(report.passed())
}

fn profile(args: &ProfileArgs) -> Result<bool, CliError> {
    let p = BubbleParams::ground_state(args.n, args.lambda, vec![0.0; args.n])?;
    let rows = emit_profile(&p, args.r_max.unwrap_or(1e3 * args.lambda), args.samples)?;
    let file = File::create(&args.out).map_err(|e| CliError::Io(format!("cannot write {}: {e}", args.out.display())))?;
    write_csv(&rows, BufWriter::new(file))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Verify(a) => suite(a, &Family::ALL),
        Command::Residual(a) => suite(a, &[Family::Residual]),
        Command::Action(a) => suite(a, &[Family::Functionals]),
        Command::Kernel(a) => suite(a, &[Family::Kernel]),
        Command::Profile(a) => profile(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
