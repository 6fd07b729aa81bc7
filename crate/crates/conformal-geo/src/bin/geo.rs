use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use conformal_geo::config::{ExperimentConfig, OutputFormat};
use conformal_geo::error::Error;
use conformal_geo::geodesic::Termination;
use conformal_geo::run;

/// Conformal geodesic toolkit: curvature queries, trajectory integration,
/// closed-form oracles, invariance reports, and the cone-limit experiment.
#[derive(Parser)]
#[command(name = "geo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the curvature package at a chart point as JSON.
    Curvature(CommonArgs),
    /// Integrate one conformal geodesic and write the trajectory.
    Integrate(CommonArgs),
    /// Evaluate a closed-form Euclidean oracle operation.
    Oracle(CommonArgs),
    /// Run the cone-limit experiment over a (sigma, alpha) grid.
    Cone(CommonArgs),
    /// Run the conformal- and Moebius-invariance checks.
    Invariance(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted. Overrides `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for trajectories and cone reports. Overrides
    /// `output.format`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_UNSUPPORTED_DIMENSION: u8 = 3;
const EXIT_BLOWUP: u8 = 4;
const EXIT_TOLERANCE: u8 = 5;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::UnsupportedDimension(..) => EXIT_UNSUPPORTED_DIMENSION,
        _ => EXIT_INVALID_CONFIG,
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_INTERNAL
    })?;
    ExperimentConfig::from_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID_CONFIG
    })
}

impl CommonArgs {
    fn resolve_format(&self, cfg: &ExperimentConfig, default: OutputFormat) -> OutputFormat {
        self.format
            .map(OutputFormat::from)
            .or_else(|| cfg.output.as_ref().and_then(|o| o.format))
            .unwrap_or(default)
    }

    fn resolve_out(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.path.as_ref().map(PathBuf::from))
        })
    }

    /// Writes to the resolved output path, or stdout when there is none.
    /// A closed stdout (e.g. piping into `head`) is not an error.
    fn emit(&self, cfg: &ExperimentConfig, payload: &str) -> Result<(), u8> {
        match self.resolve_out(cfg) {
            Some(path) => std::fs::write(&path, payload).map_err(|e| {
                eprintln!("error: cannot write {}: {e}", path.display());
                EXIT_INTERNAL
            }),
            None => {
                use std::io::Write;
                match writeln!(std::io::stdout(), "{payload}") {
                    Ok(()) => Ok(()),
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                    Err(e) => {
                        eprintln!("error: cannot write to stdout: {e}");
                        Err(EXIT_INTERNAL)
                    }
                }
            }
        }
    }
}

fn run_command(cli: &Cli) -> Result<u8, u8> {
    let (args, which) = match &cli.command {
        Command::Curvature(a) => (a, "curvature"),
        Command::Integrate(a) => (a, "integrate"),
        Command::Oracle(a) => (a, "oracle"),
        Command::Cone(a) => (a, "cone"),
        Command::Invariance(a) => (a, "invariance"),
    };
    let cfg = load_config(&args.config)?;

    let fail = |e: Error| -> u8 {
        eprintln!("error: {e}");
        exit_code_for(&e)
    };

    match which {
        "curvature" => {
            let payload = run::cmd_curvature(&cfg).map_err(fail)?;
            args.emit(&cfg, &payload)?;
            Ok(0)
        }
        "oracle" => {
            let payload = run::cmd_oracle(&cfg).map_err(fail)?;
            args.emit(&cfg, &payload)?;
            Ok(0)
        }
        "integrate" => {
            let traj = run::cmd_integrate(&cfg).map_err(fail)?;
            let format = args.resolve_format(&cfg, OutputFormat::Csv);
            let payload = run::render_trajectory(&traj, format).map_err(fail)?;
            args.emit(&cfg, &payload)?;
            eprintln!("termination: {}", traj.termination.name());
            if traj.termination == Termination::Completed {
                Ok(0)
            } else {
                Ok(EXIT_BLOWUP)
            }
        }
        "cone" => {
            let report = run::cmd_cone(&cfg).map_err(fail)?;
            let format = args.resolve_format(&cfg, OutputFormat::Csv);
            let payload = match format {
                OutputFormat::Csv => report.to_csv_string(),
                OutputFormat::Json => report.to_json_string().map_err(fail)?,
            };
            args.emit(&cfg, &payload)?;
            Ok(0)
        }
        "invariance" => {
            let report = run::cmd_invariance(&cfg).map_err(fail)?;
            let payload = report.to_json_string().map_err(fail)?;
            args.emit(&cfg, &payload)?;
            eprintln!(
                "conformal max deviation: {:e}",
                report.conformal_max_deviation
            );
            eprintln!("moebius max deviation: {:e}", report.mobius_max_deviation);
            if report.pass {
                Ok(0)
            } else {
                let worst = report
                    .conformal_max_deviation
                    .max(report.mobius_max_deviation);
                eprintln!(
                    "tolerance exceeded: {worst:e} > {:e} (or reversal not exact)",
                    report.tolerance
                );
                Ok(EXIT_TOLERANCE)
            }
        }
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(code) => ExitCode::from(code),
    }
}
