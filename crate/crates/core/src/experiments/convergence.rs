use serde::Serialize;
use serde_json::json;

use super::{roles, tune_step_size, Artifact, ExperimentConfig, RunOutput, SeedRange, TuneProblem, TuneResult};
use crate::diagnostics::tv_between;
use crate::error::Result;
use crate::model::{fmt_f64, Dataset, ModelSpec, ParamVector};
use crate::oracle::{tempered_gaussian_posterior, GaussianPosterior};
use crate::par::{try_map_indexed, Execution};
use crate::proposals::{Proposal, RwConfig};
use crate::rng::derive_seed;
use crate::sampler::{Chain, TemperSpec};

/// Chains per TV estimate in the full-scale protocol.
pub const PUBLISHED_CHAINS: usize = 100_000;

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub delta: f64,
    pub tuning: Option<TuneResult>,
    pub reference: GaussianPosterior,
    pub checkpoints: Vec<u64>,
    pub tv_mhbt: Vec<f64>,
    pub tv_full_batch: Vec<f64>,
    /// Per-coordinate sample variance across chains at the last checkpoint.
    pub mhbt_variance: Vec<f64>,
    pub full_batch_variance: Vec<f64>,
    #[serde(skip)]
    pub seeds: Vec<SeedRange>,
    #[serde(skip)]
    pub chains: usize,
}

/// θ of one chain at each checkpoint.
pub(crate) fn checkpoint_states(
    model: &ModelSpec,
    data: &Dataset,
    proposal: Proposal,
    spec: TemperSpec,
    start: &ParamVector,
    root: u64,
    index: u64,
    checkpoints: &[u64],
) -> Result<Vec<ParamVector>> {
    let mut chain = Chain::new(model, data, proposal, spec, start.clone(), root, index)?;
    let mut at = 0;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &cp in checkpoints {
        chain.advance(cp - at)?;
        at = cp;
        out.push(chain.state().theta().clone());
    }
    Ok(out)
}

fn column_variance(points: &[ParamVector]) -> Vec<f64> {
    let k = points.len() as f64;
    let d = points[0].dim();
    (0..d)
        .map(|j| {
            let mean = points.iter().map(|p| p[j]).sum::<f64>() / k;
            points.iter().map(|p| (p[j] - mean) * (p[j] - mean)).sum::<f64>() / (k - 1.0).max(1.0)
        })
        .collect()
}

/// Runs `chains` MHBT and `chains` full-batch chains with the same δ and
/// measures the TV distance of each ensemble to exact tempered draws.
pub fn gaussian_convergence(cfg: &ExperimentConfig, exec: Execution) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let model = cfg.model()?;
    let section = cfg.convergence()?;
    let data = cfg.dataset()?;
    let n = data.len();
    let spec = cfg.temper()?.spec(n)?;
    let full_spec = TemperSpec::new(n, n, spec.c_n)?;
    let dim = model.param_dim();
    let start = if section.start.is_empty() {
        ParamVector::zeros(dim)
    } else {
        ParamVector::new(section.start.clone())?
    };

    let (delta, tuning) = match (cfg.tuning()?.enabled, cfg.proposal()?) {
        (true, _) => {
            let problem = TuneProblem {
                model,
                data: &data,
                spec,
                start: ParamVector::new(cfg.theta_star()?)?,
                seed: cfg.seed,
            };
            let t = tune_step_size(&problem, cfg.tuning()?)?;
            (t.delta, Some(t))
        }
        (false, Proposal::RandomWalk(rw)) => (rw.delta, None),
        (false, _) => unreachable!("validate() requires a random walk"),
    };
    let proposal = Proposal::RandomWalk(RwConfig::new(delta)?);

    let reference = tempered_gaussian_posterior(&data.column_means(), n, spec.temperature())?;
    let reference_draws = reference.sample(section.reference_draws, cfg.seed);

    let k = cfg.chains;
    let cps = &section.checkpoints;
    let mhbt_root = derive_seed(cfg.seed, roles::MHBT);
    let full_root = derive_seed(cfg.seed, roles::FULL_BATCH);
    let run = |root: u64, spec: TemperSpec| {
        try_map_indexed(exec, k, |i| {
            checkpoint_states(model, &data, proposal, spec, &start, root, i as u64, cps)
        })
    };
    let mhbt = run(mhbt_root, spec)?;
    let full = run(full_root, full_spec)?;

    let at = |runs: &[Vec<ParamVector>], c: usize| -> Vec<ParamVector> { runs.iter().map(|r| r[c].clone()).collect() };
    let mut tv_mhbt = Vec::with_capacity(cps.len());
    let mut tv_full = Vec::with_capacity(cps.len());
    for c in 0..cps.len() {
        tv_mhbt.push(tv_between(&at(&mhbt, c), &reference_draws, section.bins)?);
        tv_full.push(tv_between(&at(&full, c), &reference_draws, section.bins)?);
    }
    let last = cps.len() - 1;
    Ok(ConvergenceReport {
        delta,
        tuning,
        reference,
        checkpoints: cps.clone(),
        tv_mhbt,
        tv_full_batch: tv_full,
        mhbt_variance: column_variance(&at(&mhbt, last)),
        full_batch_variance: column_variance(&at(&full, last)),
        seeds: vec![
            SeedRange::new("mhbt", mhbt_root, k as u64),
            SeedRange::new("full-batch", full_root, k as u64),
        ],
        chains: k,
    })
}

impl ConvergenceReport {
    pub fn tv_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "tv_mhbt", "tv_full_batch"])?;
        for ((it, a), b) in self.checkpoints.iter().zip(&self.tv_mhbt).zip(&self.tv_full_batch) {
            w.write_record([it.to_string(), fmt_f64(*a), fmt_f64(*b)])?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn into_output(self) -> Result<RunOutput> {
        let mut substitutions = Vec::new();
        if self.chains < PUBLISHED_CHAINS {
            substitutions.push(format!(
                "TV estimated from {} chains per sampler instead of {PUBLISHED_CHAINS}",
                self.chains
            ));
        }
        Ok(RunOutput {
            artifacts: vec![Artifact::new("tv.csv", self.tv_csv()?)],
            summary: json!(self),
            seeds: self.seeds,
            substitutions,
            failure: None,
        })
    }
}
