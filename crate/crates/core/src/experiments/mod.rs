//! The experiment harness: TOML configuration over per-experiment defaults,
//! seeded runs, CSV artifacts, a JSON summary and a run manifest.
//!
//! Outputs are a pure function of the resolved config. Chains draw from
//! `rng::stream(derive_seed(seed, role), chain_index)`, so changing the chain
//! count never perturbs the other chains' streams.

mod config;
mod convergence;
mod manifest;
mod mixture;
mod oracle_check;
mod scaling;
pub(crate) mod toy_nn;
mod tuning;

pub use config::{
    ConvergenceSection, DataSpec, ExperimentConfig, ExperimentKind, MixtureSection, OracleSection, ScalingSection,
    TemperSection, ToyNnSection, TuningSection,
};
pub use convergence::{gaussian_convergence, ConvergenceReport, PUBLISHED_CHAINS};
pub use manifest::{config_hash, RunManifest, SeedRange};
pub use mixture::{mixture_traveling, mode_centers, MixtureReport, ModeCell, TravelRun};
pub use oracle_check::{oracle_check, symmetric_grid, OracleInstance, OracleReport};
pub use scaling::{acceptance_scaling, LargestEpsilon, ScalingCell, ScalingReport};
pub use toy_nn::{classification_error, cluster_data, toy_nn, EpochRow, ToyNnReport};
pub use tuning::{pilot_rate, tune_step_size, TuneProblem, TuneResult};

use std::path::Path;
use std::time::Instant;

use serde_json::json;

use crate::error::{Error, Result};
use crate::model::ParamVector;
use crate::par::Execution;

/// Salts for [`crate::rng::derive_seed`], one per chain family.
pub(crate) mod roles {
    pub const MHBT: u64 = 1;
    pub const FULL_BATCH: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SGD: u64 = 4;
    pub const SGLD: u64 = 5;
}

/// A named output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact {
            name: name.into(),
            bytes,
        }
    }
}

/// What an experiment produced, before anything is written.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
    pub seeds: Vec<crate::experiments::SeedRange>,
    pub substitutions: Vec<String>,
    /// A built-in check failed; artifacts are still written.
    pub failure: Option<String>,
}

/// Tunes δ for the configured random-walk MHBT chain from `theta_star`.
pub fn tune_delta(cfg: &ExperimentConfig) -> Result<TuneResult> {
    cfg.validate()?;
    let data = cfg.dataset()?;
    let spec = cfg.temper()?.spec(data.len())?;
    let problem = TuneProblem {
        model: cfg.model()?,
        data: &data,
        spec,
        start: ParamVector::new(cfg.theta_star().unwrap_or_else(|_| vec![0.0; spec_dim(cfg)]))?,
        seed: cfg.seed,
    };
    tune_step_size(&problem, cfg.tuning()?)
}

fn spec_dim(cfg: &ExperimentConfig) -> usize {
    cfg.model().map_or(0, |m| m.param_dim())
}

/// Validates `cfg` and runs its experiment without touching the filesystem.
pub fn run(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::GaussianConvergence => gaussian_convergence(cfg, exec)?.into_output(),
        ExperimentKind::MixtureTraveling => mixture_traveling(cfg, exec)?.into_output(),
        ExperimentKind::AcceptanceScaling => acceptance_scaling(cfg, exec)?.into_output(),
        ExperimentKind::ToyNn => toy_nn(cfg)?.into_output(),
        ExperimentKind::OracleCheck => oracle_check(cfg, exec)?.into_output(),
        ExperimentKind::TuneDelta => {
            let t = tune_delta(cfg)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["step", "delta", "rate"])?;
            for (i, (d, r)) in t.path.iter().enumerate() {
                w.write_record([i.to_string(), crate::model::fmt_f64(*d), crate::model::fmt_f64(*r)])?;
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok(RunOutput {
                artifacts: vec![Artifact::new("tuning.csv", bytes)],
                summary: json!({
                    "delta": t.delta,
                    "rate": t.rate,
                    "saturated": t.saturated,
                    "converged": t.converged,
                    "monotone": t.is_monotone(0.0),
                }),
                seeds: vec![SeedRange {
                    role: "pilot".into(),
                    root: cfg.seed,
                    first_index: crate::rng::PILOT_STREAM,
                    count: 1,
                }],
                substitutions: Vec::new(),
                failure: None,
            })
        }
    }
}

/// Runs `cfg` and writes its artifacts, `summary.json` and `manifest.json`
/// into `cfg.out_dir`. Every file except the manifest's wall-clock field is
/// byte-identical across re-runs.
pub fn execute(cfg: &ExperimentConfig, exec: Execution) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    let out = run(cfg, exec)?;
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(out.artifacts.len() + 1);
    for a in &out.artifacts {
        write_inside(dir, &a.name, &a.bytes)?;
        names.push(a.name.clone());
    }
    let summary = serde_json::to_vec_pretty(&out.summary).map_err(|e| Error::Parse(e.to_string()))?;
    write_inside(dir, "summary.json", &summary)?;
    names.push("summary.json".into());
    let manifest = RunManifest {
        config: cfg.clone(),
        config_hash: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        chain_seeds: out.seeds,
        substitutions: out.substitutions,
        artifacts: names,
    };
    write_inside(dir, "manifest.json", manifest.to_json().as_bytes())?;
    match out.failure {
        Some(reason) => Err(Error::Check(reason)),
        None => Ok(manifest),
    }
}

fn write_inside(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    if name.is_empty() || name.contains(['/', '\\']) || name == ".." {
        return Err(Error::contract(format!("artifact name `{name}` must be a plain file name")));
    }
    std::fs::write(dir.join(name), bytes)?;
    Ok(())
}
