use std::io::Write;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{step, ChainState, StepRecord, TemperSpec};
use crate::batch::BatchSampler;
use crate::error::{Error, Result};
use crate::model::{fmt_f64, Dataset, ModelSpec, ParamVector};
use crate::par::{try_map_indexed, Execution};
use crate::proposals::{rsgld_move, Direction, Proposal};
use crate::rng::{self, SamplerRng};

/// Settings for one chain. The rng stream is `(seed, chain_index)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub proposal: Proposal,
    pub spec: TemperSpec,
    pub iterations: u64,
    pub seed: u64,
    pub chain_index: u64,
    /// Keep a snapshot every `thin` iterations (plus the initial state).
    pub thin: u64,
    /// Keep every [`StepRecord`].
    pub record_trace: bool,
    pub initial_theta: ParamVector,
}

impl ChainConfig {
    pub fn validate(&self, model: &ModelSpec, data: &Dataset) -> Result<()> {
        self.proposal.validate()?;
        self.spec.validate()?;
        model.validate()?;
        model.check_dataset(data)?;
        if self.spec.n != data.len() {
            return Err(Error::config(format!(
                "spec n = {} but the dataset has {} records",
                self.spec.n,
                data.len()
            )));
        }
        if self.initial_theta.dim() != model.param_dim() {
            return Err(Error::Dimension {
                what: "initial theta",
                expected: model.param_dim(),
                actual: self.initial_theta.dim(),
            });
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be >= 1"));
        }
        Ok(())
    }
}

/// Proposed and accepted counts split by [`Direction`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptCounts {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

fn slot(d: Direction) -> usize {
    match d {
        Direction::Forward => 0,
        Direction::Backward => 1,
        Direction::Symmetric => 2,
    }
}

impl AcceptCounts {
    pub fn record(&mut self, direction: Direction, accepted: bool) {
        self.proposed[slot(direction)] += 1;
        self.accepted[slot(direction)] += accepted as u64;
    }

    pub fn total(&self) -> u64 {
        self.proposed.iter().sum()
    }

    /// Overall acceptance rate; `NaN` before any step.
    pub fn rate(&self) -> f64 {
        self.accepted.iter().sum::<u64>() as f64 / self.total() as f64
    }

    /// Acceptance rate among proposals in `direction`; `NaN` if none.
    pub fn direction_rate(&self, direction: Direction) -> f64 {
        let i = slot(direction);
        self.accepted[i] as f64 / self.proposed[i] as f64
    }

    pub fn merge(&mut self, other: &AcceptCounts) {
        for i in 0..3 {
            self.proposed[i] += other.proposed[i];
            self.accepted[i] += other.accepted[i];
        }
    }
}

/// A thinned view of the chain after `iteration` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    pub theta: ParamVector,
    /// Outcome of the step that produced this snapshot; `None` initially.
    pub last: Option<(bool, Direction, f64)>,
}

#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub chain_index: u64,
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<StepRecord>,
    pub counts: AcceptCounts,
    pub final_state: ChainState,
}

impl ChainTrace {
    /// CSV with columns `iter,accepted,direction,log_r,theta_0..`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.final_state.theta().dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iter".to_string(), "accepted".into(), "direction".into(), "log_r".into()];
        header.extend((0..d).map(|j| format!("theta_{j}")));
        w.write_record(&header)?;
        for s in &self.snapshots {
            let mut row = vec![s.iteration.to_string()];
            match s.last {
                Some((acc, dir, log_r)) => {
                    row.push((acc as u8).to_string());
                    row.push(dir.as_str().to_string());
                    row.push(fmt_f64(log_r));
                }
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            row.extend(s.theta.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A running MHBT chain over borrowed model and data.
pub struct Chain<'a> {
    model: &'a ModelSpec,
    data: &'a Dataset,
    proposal: Proposal,
    spec: TemperSpec,
    sampler: BatchSampler,
    rng: SamplerRng,
    probe_sampler: BatchSampler,
    probe_rng: SamplerRng,
    state: Option<ChainState>,
    counts: AcceptCounts,
}

impl<'a> Chain<'a> {
    /// Draws `I₀` from the chain's stream and scores the initial state.
    pub fn new(
        model: &'a ModelSpec,
        data: &'a Dataset,
        proposal: Proposal,
        spec: TemperSpec,
        initial_theta: ParamVector,
        seed: u64,
        chain_index: u64,
    ) -> Result<Self> {
        proposal.validate()?;
        spec.validate()?;
        let mut rng = rng::stream(seed, chain_index);
        let mut sampler = BatchSampler::new(spec.n, spec.m)?;
        let state = ChainState::init(
            initial_theta,
            proposal.needs_gradient(),
            &spec,
            model,
            data,
            &mut sampler,
            &mut rng,
        )?;
        Ok(Chain {
            model,
            data,
            proposal,
            spec,
            probe_sampler: sampler.clone(),
            sampler,
            rng,
            probe_rng: SamplerRng::seed_from_u64(rng::derive_seed(seed, chain_index)),
            state: Some(state),
            counts: AcceptCounts::default(),
        })
    }

    pub fn state(&self) -> &ChainState {
        self.state.as_ref().expect("chain state is present between steps")
    }

    pub fn counts(&self) -> &AcceptCounts {
        &self.counts
    }

    pub fn proposal(&self) -> &Proposal {
        &self.proposal
    }

    /// Swaps the kernel, e.g. after a β update. Gradient caching must match.
    pub fn set_proposal(&mut self, proposal: Proposal) -> Result<()> {
        proposal.validate()?;
        if proposal.needs_gradient() != self.proposal.needs_gradient() {
            return Err(Error::contract("cannot switch between gradient and gradient-free kernels"));
        }
        self.proposal = proposal;
        Ok(())
    }

    pub fn rng(&mut self) -> &mut SamplerRng {
        &mut self.rng
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let state = self.state.take().expect("chain state is present between steps");
        let (next, record) = step(
            state,
            &self.proposal,
            &self.spec,
            self.model,
            self.data,
            &mut self.sampler,
            &mut self.rng,
        )?;
        self.state = Some(next);
        self.counts.record(record.direction, record.accepted);
        Ok(record)
    }

    /// Mean acceptance probability of `k` forward-branch RSGLD proposals from
    /// the current state. Uses separate streams and leaves the chain untouched.
    pub fn probe_forward(&mut self, k: usize) -> Result<f64> {
        let Proposal::Rsgld(cfg) = self.proposal else {
            return Err(Error::contract("forward probes need an RSGLD kernel"));
        };
        let state = self.state.as_ref().expect("chain state is present between steps");
        let grad = state.grad().ok_or_else(|| Error::contract("missing cached gradient"))?;
        let mut total = 0.0;
        for _ in 0..k {
            let z: Vec<f64> = (0..grad.dim())
                .map(|_| self.probe_rng.sample(rand_distr::StandardNormal))
                .collect();
            let theta_new = rsgld_move(state.theta(), grad, &cfg, Direction::Forward, &z)?;
            let batch = self.probe_sampler.draw(&mut self.probe_rng);
            let (mean, grad_new) = self.model.batch_mean_loglik_and_grad(&theta_new, self.data, &batch)?;
            let ratio = self.proposal.log_ratio(state.theta(), &theta_new, Some(grad), Some(&grad_new))?;
            let log_r = ratio + self.spec.c_n * mean - state.cached_score();
            total += log_r.min(0.0).exp();
        }
        Ok(total / k as f64)
    }

    /// Runs without keeping records; returns the number of accepted steps.
    pub fn advance(&mut self, steps: u64) -> Result<u64> {
        let mut accepted = 0;
        for _ in 0..steps {
            accepted += self.step()?.accepted as u64;
        }
        Ok(accepted)
    }
}

/// Runs one chain from `config`.
pub fn run_chain(config: &ChainConfig, model: &ModelSpec, data: &Dataset) -> Result<ChainTrace> {
    config.validate(model, data)?;
    let mut chain = Chain::new(
        model,
        data,
        config.proposal,
        config.spec,
        config.initial_theta.clone(),
        config.seed,
        config.chain_index,
    )?;
    let mut snapshots = vec![Snapshot {
        iteration: 0,
        theta: config.initial_theta.clone(),
        last: None,
    }];
    let mut records = Vec::new();
    for it in 1..=config.iterations {
        let record = chain.step()?;
        if it % config.thin == 0 {
            snapshots.push(Snapshot {
                iteration: it,
                theta: chain.state().theta().clone(),
                last: Some((record.accepted, record.direction, record.log_accept_ratio)),
            });
        }
        if config.record_trace {
            records.push(record);
        }
    }
    Ok(ChainTrace {
        chain_index: config.chain_index,
        snapshots,
        records,
        counts: chain.counts,
        final_state: chain.state.expect("chain state is present between steps"),
    })
}

/// Runs independent chains; traces come back in input order.
pub fn run_chains(
    configs: &[ChainConfig],
    model: &ModelSpec,
    data: &Dataset,
    exec: Execution,
) -> Result<Vec<ChainTrace>> {
    for c in configs {
        c.validate(model, data)?;
    }
    try_map_indexed(exec, configs.len(), |i| run_chain(&configs[i], model, data))
}
