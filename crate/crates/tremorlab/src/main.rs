use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tremorlab::commands::{cmd_analyze, cmd_report, cmd_simulate};
use tremorlab::serve::cmd_serve;
use tremorlab::{CliError, CliResult, RunConfig};
use tremorlab_core::stats::{render_report, AnalysisSettings, ResponderThresholds};

/// Tremor-assist workbench: simulate sessions, analyze them, report, serve.
///
/// Exit codes: 0 success, 2 invalid input, 3 file or network failure,
/// 4 insufficient data.
#[derive(Debug, Parser)]
#[command(name = "tremorlab", version)]
struct Cli {
    /// TOML run configuration. Missing keys take their defaults; print them
    /// with `tremorlab config`.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the cohort and persist every session with QC and outcomes.
    Simulate {
        /// Overrides `output_root`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `cohort_size`.
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Paired statistics over `<input>/summary.csv`.
    Analyze(AnalyzeArgs),
    /// Print the analysis and export plot series.
    Report {
        /// Output root of a previous run (defaults to `output_root`).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run the live session service.
    Serve {
        /// Overrides `serve.port`.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Output root of a previous run (defaults to `output_root`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Bootstrap resamples per outcome.
    #[arg(long, default_value_t = 10_000)]
    b_resamples: usize,
    /// Resampling seed (defaults to the run seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction trimmed from each tail for the trimmed mean.
    #[arg(long, default_value_t = 0.20)]
    trim: f64,
    /// Responder thresholds.
    #[arg(long, default_value = "ti=0.30,rom=5,reps=1.5")]
    thresholds: ResponderThresholds,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Task-resampling draws for the sensitivity analysis.
    #[arg(long, default_value_t = 1000)]
    sensitivity_resamples: usize,
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Simulate { out, seed, subjects } => {
            if let Some(o) = out {
                cfg.output_root = o;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = subjects {
                cfg.cohort_size = n;
            }
            let s = cmd_simulate(&cfg)?;
            println!(
                "{} sessions written to {} ({} excluded)",
                s.sessions,
                s.root.display(),
                s.excluded
            );
        }
        Command::Analyze(a) => {
            if !(0.0..0.5).contains(&a.trim) {
                return Err(CliError::Validation("--trim must lie in [0, 0.5)".into()));
            }
            if !(a.confidence > 0.0 && a.confidence < 1.0) {
                return Err(CliError::Validation("--confidence must lie in (0, 1)".into()));
            }
            let settings = AnalysisSettings {
                b_resamples: a.b_resamples,
                seed: a.seed.unwrap_or(cfg.seed),
                trim: a.trim,
                confidence: a.confidence,
                thresholds: a.thresholds,
                sensitivity_resamples: a.sensitivity_resamples,
            };
            let root = a.input.unwrap_or(cfg.output_root);
            let report = cmd_analyze(&root, &settings)?;
            print!("{}", render_report(&report));
        }
        Command::Report { input } => {
            let out = cmd_report(&input.unwrap_or(cfg.output_root))?;
            print!("{}", out.text);
            for p in out.outcome_series.iter().chain([&out.trajectories]) {
                println!("wrote {}", p.display());
            }
        }
        Command::Serve { port } => {
            if let Some(p) = port {
                cfg.serve.port = p;
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("tokio runtime", e))?;
            rt.block_on(cmd_serve(cfg))?;
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::EXIT_VALIDATION as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
