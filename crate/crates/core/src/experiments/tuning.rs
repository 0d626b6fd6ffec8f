use serde::Serialize;

use super::TuningSection;
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec, ParamVector};
use crate::proposals::{Proposal, RwConfig};
use crate::rng;
use crate::sampler::{Chain, TemperSpec};

/// The chain a random-walk δ is tuned for.
#[derive(Clone, Debug)]
pub struct TuneProblem<'a> {
    pub model: &'a ModelSpec,
    pub data: &'a Dataset,
    pub spec: TemperSpec,
    pub start: ParamVector,
    pub seed: u64,
}

/// Mean `min(1, r)` of a pilot run from `start`. Every pilot replays the same
/// stream, so rates at different δ share their random numbers.
pub fn pilot_rate(problem: &TuneProblem<'_>, delta: f64, iterations: u64) -> Result<f64> {
    let proposal = Proposal::RandomWalk(RwConfig::new(delta)?);
    let mut chain = Chain::new(
        problem.model,
        problem.data,
        proposal,
        problem.spec,
        problem.start.clone(),
        problem.seed,
        rng::PILOT_STREAM,
    )?;
    let mut total = 0.0;
    for _ in 0..iterations {
        total += chain.step()?.log_accept_ratio.min(0.0).exp();
    }
    Ok(total / iterations as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneResult {
    pub delta: f64,
    pub rate: f64,
    /// Every δ accepts with probability one (flat target).
    pub saturated: bool,
    /// The returned rate is within tolerance of the target.
    pub converged: bool,
    /// `(δ, rate)` of every pilot in evaluation order.
    pub path: Vec<(f64, f64)>,
}

impl TuneResult {
    /// Whether the pilot rates are non-increasing in δ, up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        let mut path = self.path.clone();
        path.sort_by(|a, b| a.0.total_cmp(&b.0));
        path.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }
}

const SATURATED: f64 = 1.0 - 1e-12;

/// Bisection on `log δ` over `[lower, upper]`, midpoint first, until the
/// pilot rate is within tolerance of the target or the step budget runs out.
pub fn tune_step_size(problem: &TuneProblem<'_>, tuning: &TuningSection) -> Result<TuneResult> {
    tuning.validate()?;
    let (target, tol) = (tuning.target_accept, tuning.tolerance);
    let mut path = Vec::new();
    let eval = |log_delta: f64, path: &mut Vec<(f64, f64)>| -> Result<f64> {
        let delta = log_delta.exp();
        let rate = pilot_rate(problem, delta, tuning.pilot_iterations)?;
        log::debug!("pilot delta={delta:e} rate={rate:.4}");
        path.push((delta, rate));
        Ok(rate)
    };
    let done = |delta: f64, rate: f64, path: Vec<(f64, f64)>| TuneResult {
        delta,
        rate,
        saturated: false,
        converged: true,
        path,
    };

    let (mut lo, mut hi) = (tuning.lower.ln(), tuning.upper.ln());
    let mid = 0.5 * (lo + hi);
    let rate = eval(mid, &mut path)?;
    if (rate - target).abs() <= tol {
        return Ok(done(mid.exp(), rate, path));
    }
    // check that the bracket end on the far side of the target reaches it
    let end = if rate > target { hi } else { lo };
    let end_rate = eval(end, &mut path)?;
    if (end_rate - target).abs() <= tol {
        return Ok(done(end.exp(), end_rate, path));
    }
    if rate >= SATURATED && end_rate >= SATURATED {
        return Ok(TuneResult {
            delta: mid.exp(),
            rate,
            saturated: true,
            converged: false,
            path,
        });
    }
    if (rate > target) == (end_rate > target) {
        let rates: Vec<String> = path.iter().map(|(d, r)| format!("rate {r:.4} at delta {d:e}")).collect();
        return Err(Error::Tuning(format!(
            "target acceptance {target} not bracketed within [{:e}, {:e}]: {}",
            tuning.lower,
            tuning.upper,
            rates.join(", ")
        )));
    }
    if rate > target {
        lo = mid;
    } else {
        hi = mid;
    }
    for _ in 1..tuning.max_bisections {
        let mid = 0.5 * (lo + hi);
        let rate = eval(mid, &mut path)?;
        if (rate - target).abs() <= tol {
            return Ok(done(mid.exp(), rate, path));
        }
        if rate > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let &(delta, rate) = path
        .iter()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .expect("at least one pilot ran");
    log::warn!("tuning stopped after {} bisections at rate {rate:.4}", tuning.max_bisections);
    Ok(TuneResult {
        delta,
        rate,
        saturated: false,
        converged: false,
        path,
    })
}
