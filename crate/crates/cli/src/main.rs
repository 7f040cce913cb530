use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conslaw_cli::{cmd_dump_operators, cmd_rows, cmd_run, cmd_verify, CliError, Report, RunConfig};

#[derive(Parser)]
#[command(name = "conslaw", version, about = "Staggered-grid conservation-law solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Steps between field snapshots (0 disables them)
    #[arg(long, global = true)]
    snapshot_every: Option<usize>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Structural checks: exactness, block pattern, space-time split
    Verify,
    /// Time integration
    Run,
    /// Active rows of a model and their vector-calculus form
    Rows {
        /// maxwell, schrodinger, elasticity or yang-mills (default: config model)
        model: Option<String>,
    },
    /// Write incidence matrices and Hodge weights
    DumpOperators,
}

fn load(cli: &Cli, required: bool) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if required => return Err(CliError::Config("--config PATH is required".into())),
        None => RunConfig::new("maxwell", &[4, 4, 4]),
    };
    if let Some(t) = cli.threads {
        cfg.output.threads = t;
    }
    if let Some(k) = cli.snapshot_every {
        cfg.output.snapshot_every = k;
    }
    if let Some(out) = &cli.out {
        let cwd = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
        cfg.output.dir = cwd.join(out).display().to_string();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let cfg = match &cli.command {
        Command::Rows { model: Some(_) } => None,
        Command::Verify => Some(load(cli, false)?),
        _ => Some(load(cli, true)?),
    };
    let threads = cfg.as_ref().map_or(0, |c| c.output.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| match (&cli.command, &cfg) {
        (Command::Verify, Some(cfg)) => cmd_verify(cfg),
        (Command::Run, Some(cfg)) => cmd_run(cfg),
        (Command::DumpOperators, Some(cfg)) => cmd_dump_operators(cfg),
        (Command::Rows { model: Some(m) }, _) => cmd_rows(m),
        (Command::Rows { model: None }, Some(cfg)) => cmd_rows(&cfg.model),
        _ => unreachable!("config is loaded for every other verb"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::from(report.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
