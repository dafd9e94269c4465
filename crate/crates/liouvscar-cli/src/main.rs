use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sha2::{Digest, Sha256};

mod config;
mod error;
mod output;
mod run;

use config::{Command, RunConfig};
use error::CliError;

/// Liouvillean spectra and dynamics of dephased scar models.
#[derive(Parser, Debug)]
#[command(name = "liouvscar", version)]
struct Args {
    /// Commands to run; defaults to the `commands` list of the config.
    #[arg(value_enum)]
    commands: Vec<CommandArg>,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides LIOUVSCAR_WORKERS and `workers`.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for random couplings; overrides `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run even when blocks exceed the memory budget.
    #[arg(long)]
    override_budget: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum CommandArg {
    Spectrum,
    Sweep,
    Perturb,
    Dynamics,
    Scaling,
    SymmetryCheck,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Spectrum => Command::Spectrum,
            CommandArg::Sweep => Command::Sweep,
            CommandArg::Perturb => Command::Perturb,
            CommandArg::Dynamics => Command::Dynamics,
            CommandArg::Scaling => Command::Scaling,
            CommandArg::SymmetryCheck => Command::SymmetryCheck,
        }
    }
}

fn workers(args: &Args, cfg: &RunConfig) -> Result<Option<usize>, CliError> {
    if let Some(w) = args.workers {
        return Ok(Some(w));
    }
    if let Ok(v) = std::env::var("LIOUVSCAR_WORKERS") {
        return v.trim().parse().map(Some).map_err(|_| CliError::Config(format!("LIOUVSCAR_WORKERS: not a count: {v:?}")));
    }
    Ok(cfg.workers)
}

fn main_inner(args: Args) -> Result<(), CliError> {
    let (mut cfg, text) = RunConfig::load(&args.config)?;
    if !args.commands.is_empty() {
        cfg.commands = args.commands.iter().map(|&c| c.into()).collect();
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if args.seed.is_some() {
        cfg.rng_seed = args.seed;
        cfg.model.rng_seed = args.seed;
    }
    cfg.validate()?;
    match workers(&args, &cfg)? {
        Some(0) => return Err(CliError::Config("workers: must be at least 1".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("workers: {e}")))?;
        }
        None => {}
    }

    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    if let Some(s) = args.seed {
        hasher.update(format!("\nseed={s}").as_bytes());
    }
    let hash = hex::encode(hasher.finalize());

    let mut out = output::Emitter::new(&cfg.output_dir, hash)?;
    let budget = run::Budget::new(cfg.memory_budget_gib, args.override_budget);
    let outcome = run::run(&cfg, budget, &mut out)?;
    for g in &outcome.gaps {
        log::warn!("{} gap: sector {:?}, gamma {:?}: {}", g.command, g.sector, g.gamma, g.error);
    }
    log::info!("{} files in {}", outcome.files.len(), cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
