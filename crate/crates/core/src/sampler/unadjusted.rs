//! Baselines that move without an MH test.

use rand::Rng;

use crate::batch::BatchSampler;
use crate::error::Result;
use crate::model::{Dataset, ModelSpec, ParamVector};
use crate::proposals::{propose_sgld, RsgldConfig};

/// Plain SGLD: `θ + ε ĝ_I(θ) + (√(2ε)/n) Z` on a fresh batch, always kept.
pub fn sgld_update<R: Rng + ?Sized>(
    theta: &[f64],
    cfg: &RsgldConfig,
    model: &ModelSpec,
    data: &Dataset,
    sampler: &mut BatchSampler,
    rng: &mut R,
) -> Result<ParamVector> {
    let batch = sampler.draw(rng);
    let grad = model.batch_mean_grad(theta, data, &batch)?;
    propose_sgld(theta, &grad, cfg, rng)
}

/// Mini-batch gradient ascent on the mean log-likelihood, `θ + ε ĝ_I(θ)`.
pub fn sgd_update<R: Rng + ?Sized>(
    theta: &[f64],
    epsilon: f64,
    model: &ModelSpec,
    data: &Dataset,
    sampler: &mut BatchSampler,
    rng: &mut R,
) -> Result<ParamVector> {
    let batch = sampler.draw(rng);
    let grad = model.batch_mean_grad(theta, data, &batch)?;
    ParamVector::new(theta.iter().zip(grad.iter()).map(|(t, g)| t + epsilon * g).collect())
}
