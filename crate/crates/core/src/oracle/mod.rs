//! Reference distributions: the closed-form tempered Gaussian posterior, the
//! explicit mixture posterior, the subsampling bias term `U(θ)`, and exact
//! stationary distributions of tiny discretised chains.

mod stationary;
mod subsets;

pub use stationary::{exact_stationary, simulate_discrete, DiscreteChainSpec, StationaryResult};
pub use subsets::Subsets;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::batch::{BatchIndex, BatchSampler};
use crate::error::{Error, Result};
use crate::math::{binomial, log_add_exp, log_sum_exp};
use crate::model::{Dataset, ModelSpec, ParamVector};
use crate::rng;
use crate::sampler::TemperSpec;

/// Largest `C(n, m)` enumerated exactly by [`bias_term_u`].
pub const MAX_EXACT_SUBSETS: u128 = 1_000_000;

/// `N(mean, variance · I_d)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianPosterior {
    pub mean: ParamVector,
    pub variance: f64,
}

impl GaussianPosterior {
    /// `k` independent draws, deterministic given `seed`.
    pub fn sample(&self, k: usize, seed: u64) -> Vec<ParamVector> {
        let mut rng = rng::stream(seed, rng::REFERENCE_STREAM);
        let sd = self.variance.sqrt();
        (0..k)
            .map(|_| {
                let v = self.mean.iter().map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)).collect();
                ParamVector::new(v).expect("finite draws")
            })
            .collect()
    }
}

/// Posterior of the unit-variance Gaussian mean under a `N(0, I)` prior,
/// raised to `1/T`: mean `n/(n+1)·x̄`, variance `T/(n+1)`.
pub fn tempered_gaussian_posterior(xbar: &[f64], n: usize, temperature: f64) -> Result<GaussianPosterior> {
    if n == 0 {
        return Err(Error::contract("posterior needs n >= 1"));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::contract(format!("temperature must be positive, got {temperature}")));
    }
    let shrink = n as f64 / (n as f64 + 1.0);
    Ok(GaussianPosterior {
        mean: ParamVector::new(xbar.iter().map(|x| shrink * x).collect())?,
        variance: temperature / (n as f64 + 1.0),
    })
}

/// Unnormalised log posterior of the two-component mixture under the
/// `N(0, diag(σ₁², σ₂²))` prior, with the record-independent constants dropped.
pub fn mixture_log_posterior(theta: &[f64], xs: &[f64], var_x: f64, var_1: f64, var_2: f64) -> Result<f64> {
    ModelSpec::gaussian_mixture(var_x, var_1, var_2).validate()?;
    if theta.len() != 2 {
        return Err(Error::Dimension {
            what: "theta",
            expected: 2,
            actual: theta.len(),
        });
    }
    let (t1, t2) = (theta[0], theta[1]);
    let s = t1 + t2;
    let prior = -0.5 * (t1 * t1 / var_1 + t2 * t2 / var_2);
    let k = 1.0 / (2.0 * var_x);
    let lik: f64 = xs
        .iter()
        .map(|&x| log_add_exp(-k * (t1 * t1 - 2.0 * t1 * x), -k * (s * s - 2.0 * s * x)))
        .sum();
    Ok(prior + lik)
}

/// How [`bias_term_u`] averages over batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UMode {
    /// Enumerate all `C(n, m)` subsets.
    Exact,
    /// Average over `draws` uniform subsets.
    MonteCarlo { draws: usize, seed: u64 },
}

/// `U(θ)` and, in Monte Carlo mode, the standard error of the estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UEstimate {
    pub value: f64,
    pub log_value: f64,
    pub std_error: Option<f64>,
    pub subsets: usize,
}

/// `C(n,m)⁻¹ Σ_I exp(c_n (μ̂_I(θ) − μ(θ)))`.
pub fn bias_term_u(
    theta: &[f64],
    model: &ModelSpec,
    data: &Dataset,
    spec: &TemperSpec,
    mode: UMode,
) -> Result<UEstimate> {
    spec.validate()?;
    if spec.n != data.len() {
        return Err(Error::contract("spec n does not match the dataset"));
    }
    let mu = model.full_mean_loglik(theta, data)?;
    let term = |batch: &BatchIndex| -> Result<f64> {
        Ok(spec.c_n * (model.batch_mean_loglik(theta, data, batch)? - mu))
    };
    match mode {
        UMode::Exact => {
            let count = binomial(spec.n, spec.m);
            if count > MAX_EXACT_SUBSETS {
                return Err(Error::contract(format!(
                    "C({}, {}) = {count} subsets exceeds the exact limit {MAX_EXACT_SUBSETS}; use Monte Carlo mode",
                    spec.n, spec.m
                )));
            }
            let logs = Subsets::new(spec.n, spec.m)
                .map(|s| term(&BatchIndex::from_indices(spec.n, s)?))
                .collect::<Result<Vec<f64>>>()?;
            let log_value = log_sum_exp(&logs) - (logs.len() as f64).ln();
            Ok(UEstimate {
                value: log_value.exp(),
                log_value,
                std_error: None,
                subsets: logs.len(),
            })
        }
        UMode::MonteCarlo { draws, seed } => {
            if draws < 2 {
                return Err(Error::contract("Monte Carlo mode needs at least 2 draws"));
            }
            let mut rng = rng::stream(seed, rng::REFERENCE_STREAM);
            let mut sampler = BatchSampler::new(spec.n, spec.m)?;
            let vals = (0..draws)
                .map(|_| term(&sampler.draw(&mut rng)).map(f64::exp))
                .collect::<Result<Vec<f64>>>()?;
            let mean = vals.iter().sum::<f64>() / draws as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (draws - 1) as f64;
            Ok(UEstimate {
                value: mean,
                log_value: mean.ln(),
                std_error: Some((var / draws as f64).sqrt()),
                subsets: draws,
            })
        }
    }
}

/// Unnormalised log θ-marginal of the augmented target under a flat prior:
/// `c_n μ(θ) + log U(θ)`.
pub fn marginal_tilde_pi(
    theta: &[f64],
    model: &ModelSpec,
    data: &Dataset,
    spec: &TemperSpec,
    mode: UMode,
) -> Result<f64> {
    let mu = model.full_mean_loglik(theta, data)?;
    Ok(spec.c_n * mu + bias_term_u(theta, model, data, spec, mode)?.log_value)
}

/// Index of the largest value; ties go to the first.
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// `KL(p ‖ q)` for normalised vectors; infinite if `q` misses mass of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

/// Normalises log weights to probabilities.
pub fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(logs);
    logs.iter().map(|l| (l - z).exp()).collect()
}
