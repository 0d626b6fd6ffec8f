use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mhbt::experiments::{execute, ExperimentConfig, ExperimentKind};
use mhbt::{Error, Execution};

/// Run mini-batch MH experiments and write CSV results plus a run manifest.
#[derive(Parser, Debug)]
#[command(name = "mhbt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config merged over the experiment's defaults, or a manifest.json to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of independent chains.
    #[arg(long, global = true)]
    chains: Option<usize>,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// TV distance to the tempered gaussian posterior across many chains.
    GaussianConvergence,
    /// Mode crossings on the two-component mixture posterior.
    MixtureTraveling,
    /// Mean acceptance of SGLD and RSGLD over an ε grid and several dimensions.
    AcceptanceScaling,
    /// RSGLD with the adaptive β schedule on a small MLP classifier.
    ToyNn,
    /// Bisect the random-walk step size to the target acceptance rate.
    TuneDelta,
    /// Exact stationary-distribution check over a matrix of tiny chains.
    OracleCheck,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::GaussianConvergence => ExperimentKind::GaussianConvergence,
            Command::MixtureTraveling => ExperimentKind::MixtureTraveling,
            Command::AcceptanceScaling => ExperimentKind::AcceptanceScaling,
            Command::ToyNn => ExperimentKind::ToyNn,
            Command::TuneDelta => ExperimentKind::TuneDelta,
            Command::OracleCheck => ExperimentKind::OracleCheck,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        None => ExperimentConfig::defaults(kind),
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(Error::Config(format!(
                    "manifest is for {} but {} was requested",
                    cfg.experiment.as_str(),
                    kind.as_str()
                )));
            }
            cfg
        }
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_toml_for(kind, &text)?
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(chains) = cli.chains {
        cfg.chains = chains;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(t) = cli.threads {
        if t == 0 {
            log::error!("--threads must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::error!("cannot configure the thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(if e.is_config() { 1 } else { 2 });
        }
    };
    log::info!(
        "running {} (seed {}, {} chains) into {}",
        cfg.experiment.as_str(),
        cfg.seed,
        cfg.chains,
        cfg.out_dir.display()
    );
    match execute(&cfg, Execution::Parallel) {
        Ok(manifest) => {
            log::info!(
                "wrote {} files in {:.1}s",
                manifest.artifacts.len() + 1,
                manifest.wall_clock_seconds
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
