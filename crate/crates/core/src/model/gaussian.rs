use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::math::LN_2PI;

/// Which record log-likelihood the gaussian-mean family reports.
///
/// `Density` is the full `log N(x; θ, σ² I)`. `Natural` keeps only the
/// θ-dependent part `(θ·x − ½‖θ‖²)/σ²`: same posterior and gradients, but
/// batch means no longer carry the subsample noise of `‖x‖²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianForm {
    #[default]
    Density,
    Natural,
}

#[inline]
fn log_norm(dim: usize, variance: f64) -> f64 {
    -0.5 * dim as f64 * (LN_2PI + variance.ln())
}

#[inline]
pub(super) fn log_lik(theta: &[f64], x: &[f64], variance: f64, form: GaussianForm) -> f64 {
    match form {
        GaussianForm::Density => {
            let sq: f64 = theta.iter().zip(x).map(|(t, v)| (v - t) * (v - t)).sum();
            log_norm(theta.len(), variance) - 0.5 * sq / variance
        }
        GaussianForm::Natural => {
            let s: f64 = theta.iter().zip(x).map(|(t, v)| t * v - 0.5 * t * t).sum();
            s / variance
        }
    }
}

#[inline]
pub(super) fn accumulate(theta: &[f64], x: &[f64], variance: f64, form: GaussianForm, grad: &mut [f64]) -> f64 {
    for ((g, t), v) in grad.iter_mut().zip(theta).zip(x) {
        *g += (v - t) / variance;
    }
    log_lik(theta, x, variance, form)
}

/// `μ(θ)` from cached column sums: mean ‖x−θ‖² = mean‖x‖² − 2θ·x̄ + ‖θ‖².
pub(super) fn full_mean_log_lik(theta: &[f64], data: &Dataset, variance: f64, form: GaussianForm) -> f64 {
    let stats = data.column_stats();
    let cross: f64 = theta.iter().zip(&stats.mean).map(|(t, m)| t * m).sum();
    let tt: f64 = theta.iter().map(|t| t * t).sum();
    match form {
        GaussianForm::Density => {
            let msq = (stats.mean_sq_norm - 2.0 * cross + tt).max(0.0);
            log_norm(theta.len(), variance) - 0.5 * msq / variance
        }
        GaussianForm::Natural => (cross - 0.5 * tt) / variance,
    }
}

pub(super) fn full_mean_grad(theta: &[f64], data: &Dataset, variance: f64, grad: &mut [f64]) {
    let stats = data.column_stats();
    for ((g, t), m) in grad.iter_mut().zip(theta).zip(&stats.mean) {
        *g = (m - t) / variance;
    }
}
