use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crackfield::config::{dump_config, parse_config_over};
use crackfield::study::{self, StudyError, StudyKind};

#[derive(Parser)]
#[command(name = "crackfield", version, about = "Adaptive phase-field fracture solver for pressurized cracks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file of `key = value` lines. Omitted keys use the study preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `run.output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. The solver runs sequentially, so results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Write the final Newton system as Matrix Market files (solve only).
    #[arg(long, global = true)]
    dump_matrices: bool,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Adaptive solve with VTK, level table and crack opening profile.
    Solve,
    /// Crack volume convergence in the regularization length.
    EpsConv,
    /// Crack volume error against domain size.
    DomainStudy,
    /// Crack opening convergence, adaptive against uniform refinement.
    CodStudy,
    /// Penny-shaped crack convergence table.
    Sneddon3d,
}

impl Command {
    fn kind(self) -> StudyKind {
        match self {
            Command::Solve => StudyKind::Solve,
            Command::EpsConv => StudyKind::EpsConvergence,
            Command::DomainStudy => StudyKind::DomainStudy,
            Command::CodStudy => StudyKind::CodStudy,
            Command::Sneddon3d => StudyKind::Sneddon3d,
        }
    }
}

fn run(cli: &Cli) -> Result<String, StudyError> {
    let kind = cli.command.kind();
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|source| {
            StudyError::Output(crackfield::output::OutputError::Io { path: p.clone(), source })
        })?,
        None => String::new(),
    };
    let cfg = parse_config_over(kind.preset(), &text)?;
    if cli.print_config {
        return Ok(dump_config(&cfg));
    }
    if cli.threads > 1 {
        log::info!("--threads {} requested; running sequentially", cli.threads);
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir)).join(kind.name());
    let out = Some(dir.as_path());
    Ok(match kind {
        StudyKind::Solve => study::solve(&cfg, out, cli.dump_matrices)?.summary,
        StudyKind::EpsConvergence => study::eps_convergence(&cfg, out)?.summary,
        StudyKind::DomainStudy => study::domain_study(&cfg, out)?.summary,
        StudyKind::CodStudy => study::cod_study(&cfg, out)?.summary,
        StudyKind::Sneddon3d => study::sneddon3d(&cfg, out)?.summary,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
