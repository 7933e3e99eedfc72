mod compute;
mod error;
mod geodesic;
mod verify;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dualflat::geodesics::divergence_profile;
use dualflat::identities::{verify_family, SampleConfig, DEFAULT_SAMPLES, DEFAULT_TOL_CLOSED, DEFAULT_TOL_QUAD};
use dualflat::{Chart, ConjugateMode, Family, FamilyKind};

use crate::error::{CliError, CliResult};
use crate::geodesic::{build_endpoint, classify, parse_endpoint, profile_csv, EndpointSpec};

/// Dually flat statistical manifolds: divergences, geodesic profiles and
/// randomized identity checks.
#[derive(Debug, Parser)]
#[command(name = "dualflat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the tasks of a JSON problem file.
    Compute {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = ComputeFormat::Json)]
        format: ComputeFormat,
    },
    /// Run every identity and inequality check on one family.
    Verify(VerifyArgs),
    /// Write the divergence profile along a geodesic segment as CSV.
    Geodesic(GeodesicArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ComputeFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// kind[:config], e.g. gaussian1d, binomial:10, categorical:4, selfdual:2,
    /// mixture or mixture:0.5,0.5;0.9,0.1
    #[arg(long, value_parser = parse_family)]
    family: FamilyKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES, value_parser = parse_samples)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_TOL_CLOSED, value_parser = parse_tolerance)]
    tol_closed: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_QUAD, value_parser = parse_tolerance)]
    tol_quad: f64,
    /// Route φ and θ(η) through the numerical conjugate solver.
    #[arg(long)]
    numerical_conjugate: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct GeodesicArgs {
    #[arg(long, value_parser = parse_family)]
    family: FamilyKind,
    /// theta:x1,..  eta:x1,..  or params:key=value,..
    #[arg(long, value_parser = parse_endpoint, allow_hyphen_values = true)]
    from: EndpointSpec,
    #[arg(long, value_parser = parse_endpoint, allow_hyphen_values = true)]
    to: EndpointSpec,
    #[arg(long, value_parser = parse_chart, default_value = "theta")]
    chart: Chart,
    /// Number of grid points in t ∈ [0, 1], at least 2.
    #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u32).range(2..))]
    grid: u32,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_family(text: &str) -> Result<FamilyKind, String> {
    let kind: FamilyKind = text.parse().map_err(|e: dualflat::Error| e.to_string())?;
    Family::new(kind.clone()).map_err(|e| e.to_string())?;
    Ok(kind)
}

fn parse_samples(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("sample count must be a positive integer, got {text:?}")),
    }
}

fn parse_tolerance(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
        _ => Err(format!("tolerance must be a positive number, got {text:?}")),
    }
}

fn parse_chart(text: &str) -> Result<Chart, String> {
    text.parse().map_err(|e: dualflat::Error| e.to_string())
}

fn write_output(path: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn run_compute(problem: &PathBuf, format: ComputeFormat) -> CliResult<ExitCode> {
    let text = fs::read_to_string(problem)
        .map_err(|source| CliError::Io { path: problem.display().to_string(), source })?;
    let problem = compute::parse_problem(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", problem.display())))?;
    let output = compute::run_problem(&problem)?;
    let rendered = match format {
        ComputeFormat::Json => {
            let mut s = serde_json::to_string_pretty(&output).expect("compute output serializes");
            s.push('\n');
            s
        }
        ComputeFormat::Csv => {
            for r in output.results.iter().filter_map(|r| r.message.as_ref().map(|m| (r, m))) {
                eprintln!("{}({}): {}", r.0.op.name(), r.0.args.join(","), r.1);
            }
            output.to_csv()
        }
    };
    write_output(None, &rendered)?;
    Ok(ExitCode::from(if output.all_ok() { 0 } else { 2 }))
}

fn run_verify(args: &VerifyArgs) -> CliResult<ExitCode> {
    let mode = if args.numerical_conjugate { ConjugateMode::Numerical } else { ConjugateMode::ClosedForm };
    let family = Family::new(args.family.clone())?.with_conjugate_mode(mode);
    let config = SampleConfig::new(args.seed, args.samples)?.with_tolerances(args.tol_closed, args.tol_quad)?;
    let reports = match verify_family(&family, &config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: verification of {} aborted: {e}", family.label());
            return Ok(ExitCode::from(3));
        }
    };
    let passed = reports.iter().all(|r| r.passed);
    let rendered = match args.format {
        ReportFormat::Table => verify::table(&family.label(), &config, &reports),
        ReportFormat::Json => {
            let out = verify::VerifyOutput {
                family: family.label(),
                conjugate: mode,
                config: &config,
                passed,
                reports: &reports,
            };
            let mut s = serde_json::to_string_pretty(&out).expect("reports serialize");
            s.push('\n');
            s
        }
    };
    write_output(None, &rendered)?;
    Ok(ExitCode::from(if passed { 0 } else { 3 }))
}

fn run_geodesic(args: &GeodesicArgs) -> CliResult<ExitCode> {
    let family = Family::new(args.family.clone())?;
    let p = build_endpoint(&family, &args.from)?;
    let r = build_endpoint(&family, &args.to)?;
    let profile = divergence_profile(&family, &p, &r, args.chart, args.grid as usize).map_err(classify)?;
    write_output(args.output.as_ref(), &profile_csv(&profile))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Compute { problem, format } => run_compute(problem, *format),
        Command::Verify(args) => run_verify(args),
        Command::Geodesic(args) => run_geodesic(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    })
}
