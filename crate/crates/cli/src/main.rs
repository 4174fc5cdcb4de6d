use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spin_so4_cli::report::write_file;
use spin_so4_cli::{algebra_ladder_study, exit, run, Format, Report, RunConfig};

#[derive(Parser)]
#[command(name = "spin-so4", version, about = "Verification runner for the spin-symmetric Dirac-Coulomb problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected suites and report every check.
    Run {
        #[command(flatten)]
        common: Common,
        /// Suites to run (spectrum, algebra, radial, ks, limits, all); overrides `suites`.
        suites: Vec<String>,
    },
    /// Re-render a JSON report as json, csv or text.
    Emit {
        /// Report written by `run` or `ladder`.
        report: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operator-algebra convergence study over the grid ladder.
    Ladder {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn load(common: &Common, extra: Vec<String>) -> Result<RunConfig, Failure> {
    let text = match &common.config {
        Some(path) => Some(
            std::fs::read_to_string(path).map_err(|e| Failure(format!("cannot read config {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut overrides = common.set.clone();
    overrides.extend(extra);
    let cfg = RunConfig::from_parts(text.as_deref(), &overrides, common.seed).map_err(|e| match &common.config {
        Some(path) => Failure(format!("{}: {e}", path.display())),
        None => Failure(e.to_string()),
    })?;
    Ok(cfg)
}

/// Writes the canonical JSON (plus the requested rendering) when a directory
/// is given, and prints the rendering.
fn deliver(report: &Report, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    if let Some(dir) = out {
        report.emit(Format::Json, dir, "report")?;
        if format != Format::Json {
            report.emit(format, dir, "report")?;
        }
    }
    print!("{}", report.render(format)?);
    Ok(())
}

fn status(report: &Report) -> u8 {
    if report.all_passed() {
        exit::PASS
    } else {
        exit::CHECK_FAILED
    }
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run { common, suites } => {
            let extra = if suites.is_empty() {
                Vec::new()
            } else {
                vec![format!("suites={}", suites.join(","))]
            };
            let cfg = load(&common, extra)?;
            let report = run(&cfg);
            let out = common.out.or(cfg.output_dir.clone());
            deliver(&report, common.format.unwrap_or(cfg.format), out.as_deref())?;
            Ok(status(&report))
        }
        Command::Emit { report, format, out } => {
            let report = Report::read(&report)?;
            if !report.is_consistent() {
                return Err(Failure("report pass flags or totals do not follow from its records".into()));
            }
            let format = format.unwrap_or(Format::Text);
            match out {
                Some(dir) => {
                    let path = report.emit(format, &dir, "report")?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", report.render(format)?),
            }
            Ok(exit::PASS)
        }
        Command::Ladder { common } => {
            let cfg = load(&common, Vec::new())?;
            let study = algebra_ladder_study(&cfg);
            let report = Report::new(vec!["algebra".into()], cfg.seed, cfg.echo.clone(), study.records.clone());
            let out = common.out.or(cfg.output_dir.clone());
            if let Some(dir) = &out {
                write_file(dir, "ladder.csv", &study.to_csv()?)?;
            }
            deliver(&report, common.format.unwrap_or(cfg.format), out.as_deref())?;
            Ok(status(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(exit::ERROR)
        }
    }
}
