//! The MHBT transition: propose θ′, draw a fresh batch I′, and accept with
//! probability `min(1, q(θ′→θ) e^{c_n μ̂_{I′}(θ′)} / (q(θ→θ′) e^{c_n μ̂_{I_t}(θ_t)}))`.

mod chain;
mod unadjusted;

pub use chain::{run_chain, run_chains, AcceptCounts, Chain, ChainConfig, ChainTrace, Snapshot};
pub use unadjusted::{sgd_update, sgld_update};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{BatchIndex, BatchSampler};
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec, ParamVector};
use crate::proposals::{Direction, Proposal};

/// Dataset size `n`, batch size `m` and scaling constant `c_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperSpec {
    pub n: usize,
    pub m: usize,
    pub c_n: f64,
}

impl TemperSpec {
    pub fn new(n: usize, m: usize, c_n: f64) -> Result<Self> {
        let spec = TemperSpec { n, m, c_n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::config(format!(
                "batch size must satisfy 1 <= m <= n, got m={}, n={}",
                self.m, self.n
            )));
        }
        if !(self.c_n.is_finite() && self.c_n > 0.0) {
            return Err(Error::config(format!("c_n must be positive, got {}", self.c_n)));
        }
        Ok(())
    }

    /// `T = n / c_n`.
    pub fn temperature(&self) -> f64 {
        self.n as f64 / self.c_n
    }

    /// Iterations per epoch, `⌈n/m⌉`.
    pub fn epoch_len(&self) -> usize {
        self.n.div_ceil(self.m)
    }
}

/// `(θ_t, I_t)` together with the cached score `c_n·μ̂_{I_t}(θ_t)`.
///
/// Gradient proposals also cache `ĝ_{I_t}(θ_t)` so each batch gradient is
/// evaluated once.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    theta: ParamVector,
    batch: BatchIndex,
    cached_score: f64,
    grad: Option<ParamVector>,
    iteration: u64,
}

impl ChainState {
    /// Scores `(θ, I)` from scratch.
    pub fn new(
        theta: ParamVector,
        batch: BatchIndex,
        with_grad: bool,
        spec: &TemperSpec,
        model: &ModelSpec,
        data: &Dataset,
    ) -> Result<Self> {
        let (score, grad) = evaluate(&theta, &batch, with_grad, spec, model, data)?;
        Ok(ChainState {
            theta,
            batch,
            cached_score: score,
            grad,
            iteration: 0,
        })
    }

    /// Draws `I₀` uniformly and scores `(θ₀, I₀)`.
    pub fn init<R: Rng + ?Sized>(
        theta: ParamVector,
        with_grad: bool,
        spec: &TemperSpec,
        model: &ModelSpec,
        data: &Dataset,
        sampler: &mut BatchSampler,
        rng: &mut R,
    ) -> Result<Self> {
        let batch = sampler.draw(rng);
        Self::new(theta, batch, with_grad, spec, model, data)
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn batch(&self) -> &BatchIndex {
        &self.batch
    }

    pub fn cached_score(&self) -> f64 {
        self.cached_score
    }

    pub fn grad(&self) -> Option<&ParamVector> {
        self.grad.as_ref()
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }
}

/// Everything drawn and computed in one MHBT step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub proposed_theta: ParamVector,
    pub proposed_batch: BatchIndex,
    pub direction: Direction,
    pub log_accept_ratio: f64,
    pub uniform_draw: f64,
    pub accepted: bool,
}

/// `c_n·μ̂_I(θ)` and, on request, `ĝ_I(θ)`.
fn evaluate(
    theta: &[f64],
    batch: &BatchIndex,
    with_grad: bool,
    spec: &TemperSpec,
    model: &ModelSpec,
    data: &Dataset,
) -> Result<(f64, Option<ParamVector>)> {
    if with_grad {
        let (mean, grad) = model.batch_mean_loglik_and_grad(theta, data, batch)?;
        Ok((spec.c_n * mean, Some(grad)))
    } else {
        Ok((spec.c_n * model.batch_mean_loglik(theta, data, batch)?, None))
    }
}

fn ratio_from_score(current: &ChainState, score_new: f64, log_q_forward: f64, log_q_reverse: f64) -> Result<f64> {
    if !log_q_forward.is_finite() || !log_q_reverse.is_finite() {
        return Err(Error::contract(format!(
            "proposal log densities must be finite (forward {log_q_forward}, reverse {log_q_reverse})"
        )));
    }
    Ok(log_q_reverse - log_q_forward + score_new - current.cached_score)
}

/// `log q(θ′→θ_t) − log q(θ_t→θ′) + c_n·μ̂_{I′}(θ′) − cached score`.
#[allow(clippy::too_many_arguments)]
pub fn log_accept_ratio(
    current: &ChainState,
    proposed_theta: &[f64],
    proposed_batch: &BatchIndex,
    log_q_forward: f64,
    log_q_reverse: f64,
    spec: &TemperSpec,
    model: &ModelSpec,
    data: &Dataset,
) -> Result<f64> {
    let score = spec.c_n * model.batch_mean_loglik(proposed_theta, data, proposed_batch)?;
    ratio_from_score(current, score, log_q_forward, log_q_reverse)
}

/// The MH decision `log u < min(0, log r)`, with `u = 0` mapped to the
/// smallest positive double.
pub fn accept(log_r: f64, u: f64) -> bool {
    let u = if u > 0.0 { u } else { f64::from_bits(1) };
    u.ln() < log_r.min(0.0)
}

/// Completes a step once θ′, its direction, I′ and u are drawn.
#[allow(clippy::too_many_arguments)]
pub fn resolve(
    state: ChainState,
    proposed_theta: ParamVector,
    direction: Direction,
    proposed_batch: BatchIndex,
    u: f64,
    proposal: &Proposal,
    spec: &TemperSpec,
    model: &ModelSpec,
    data: &Dataset,
) -> Result<(ChainState, StepRecord)> {
    let with_grad = proposal.needs_gradient();
    let (score, grad) = evaluate(&proposed_theta, &proposed_batch, with_grad, spec, model, data)?;
    let log_r = match proposal {
        Proposal::RandomWalk(_) => ratio_from_score(&state, score, 0.0, 0.0)?,
        _ => {
            let ratio = proposal.log_ratio(
                &state.theta,
                &proposed_theta,
                state.grad.as_deref(),
                grad.as_deref(),
            )?;
            if !ratio.is_finite() {
                return Err(Error::contract(format!("proposal log ratio is not finite ({ratio})")));
            }
            ratio + score - state.cached_score
        }
    };
    let accepted = accept(log_r, u);
    let record = StepRecord {
        proposed_theta,
        proposed_batch,
        direction,
        log_accept_ratio: log_r,
        uniform_draw: u,
        accepted,
    };
    let next = if accepted {
        ChainState {
            theta: record.proposed_theta.clone(),
            batch: record.proposed_batch.clone(),
            cached_score: score,
            grad,
            iteration: state.iteration + 1,
        }
    } else {
        ChainState {
            iteration: state.iteration + 1,
            ..state
        }
    };
    Ok((next, record))
}

/// One MHBT step. Draw order: proposal, batch, then `u`.
pub fn step<R: Rng + ?Sized>(
    state: ChainState,
    proposal: &Proposal,
    spec: &TemperSpec,
    model: &ModelSpec,
    data: &Dataset,
    sampler: &mut BatchSampler,
    rng: &mut R,
) -> Result<(ChainState, StepRecord)> {
    let (theta_new, direction) = proposal.sample(&state.theta, state.grad.as_deref(), rng)?;
    let batch = sampler.draw(rng);
    let u: f64 = rng.random();
    resolve(state, theta_new, direction, batch, u, proposal, spec, model, data)
}

#[cfg(test)]
mod tests;
