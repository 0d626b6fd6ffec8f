//! Proposal kernels: symmetric Gaussian random walk, SGLD and the
//! forward/backward RSGLD mixture.
//!
//! Every kernel exposes a sampler, a `*_move` function taking an explicit
//! standard normal draw `z` (so tests can pin the noise), and a log density.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_normal_iso};
use crate::model::ParamVector;

/// Which branch produced a proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Symmetric,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Symmetric => "symmetric",
        }
    }
}

/// Gaussian random walk `θ′ = θ + δ·Z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwConfig {
    pub delta: f64,
}

impl RwConfig {
    pub fn new(delta: f64) -> Result<Self> {
        let cfg = RwConfig { delta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::config(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Parameters of the SGLD and RSGLD kernels. `epsilon` is a learning rate in
/// the SGD convention; the noise scale is `√(2ε)/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsgldConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub n: usize,
}

impl RsgldConfig {
    pub fn new(epsilon: f64, beta: f64, n: usize) -> Result<Self> {
        let cfg = RsgldConfig { epsilon, beta, n };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::config(format!("beta must be >= 1, got {}", self.beta)));
        }
        if self.n == 0 {
            return Err(Error::config("RSGLD noise scale needs n >= 1"));
        }
        Ok(())
    }

    /// Forward-branch noise standard deviation `√(2ε)/n`.
    pub fn noise_scale(&self) -> f64 {
        (2.0 * self.epsilon).sqrt() / self.n as f64
    }
}

/// A proposal kernel with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Proposal {
    #[serde(rename = "rw")]
    RandomWalk(RwConfig),
    Sgld(RsgldConfig),
    Rsgld(RsgldConfig),
}

impl Proposal {
    pub fn validate(&self) -> Result<()> {
        match self {
            Proposal::RandomWalk(c) => c.validate(),
            Proposal::Sgld(c) | Proposal::Rsgld(c) => c.validate(),
        }
    }

    /// Whether the kernel needs batch gradients at both endpoints.
    pub fn needs_gradient(&self) -> bool {
        !matches!(self, Proposal::RandomWalk(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Proposal::RandomWalk(_) => "rw",
            Proposal::Sgld(_) => "sgld",
            Proposal::Rsgld(_) => "rsgld",
        }
    }

    /// Draws `θ′` given the batch gradient at θ (ignored by the random walk).
    pub fn sample<R: Rng + ?Sized>(
        &self,
        theta: &[f64],
        grad: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<(ParamVector, Direction)> {
        match self {
            Proposal::RandomWalk(c) => Ok((propose_rw(theta, c, rng)?, Direction::Symmetric)),
            Proposal::Sgld(c) => Ok((propose_sgld(theta, need(grad)?, c, rng)?, Direction::Forward)),
            Proposal::Rsgld(c) => propose_rsgld(theta, need(grad)?, c, rng),
        }
    }

    /// `log q(θ′ → θ) − log q(θ → θ′)` where `grad_from` is the batch gradient
    /// at θ and `grad_to` the proposed batch's gradient at θ′.
    pub fn log_ratio(
        &self,
        theta: &[f64],
        theta_new: &[f64],
        grad_from: Option<&[f64]>,
        grad_to: Option<&[f64]>,
    ) -> Result<f64> {
        match self {
            Proposal::RandomWalk(_) => Ok(0.0),
            Proposal::Sgld(c) => Ok(log_density_sgld(theta_new, theta, need(grad_to)?, c)?
                - log_density_sgld(theta, theta_new, need(grad_from)?, c)?),
            Proposal::Rsgld(c) => {
                log_proposal_ratio(theta, theta_new, need(grad_from)?, need(grad_to)?, c)
            }
        }
    }
}

fn need(grad: Option<&[f64]>) -> Result<&[f64]> {
    grad.ok_or_else(|| Error::contract("gradient-based proposal called without a gradient"))
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::contract(format!("{what} has non-finite entries")))
    }
}

fn check_len(what: &'static str, expected: usize, v: &[f64]) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual: v.len(),
        })
    }
}

fn normal_draw<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn rw_move(theta: &[f64], cfg: &RwConfig, z: &[f64]) -> Result<ParamVector> {
    check_len("noise", theta.len(), z)?;
    ParamVector::new(theta.iter().zip(z).map(|(t, z)| t + cfg.delta * z).collect())
}

pub fn propose_rw<R: Rng + ?Sized>(theta: &[f64], cfg: &RwConfig, rng: &mut R) -> Result<ParamVector> {
    let z = normal_draw(theta.len(), rng);
    rw_move(theta, cfg, &z)
}

/// `log φ(θ_to − θ_from; δ² I)`.
pub fn log_density_rw(from: &[f64], to: &[f64], cfg: &RwConfig) -> Result<f64> {
    check_len("theta_to", from.len(), to)?;
    let sq: f64 = from.iter().zip(to).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(log_normal_iso(sq, cfg.delta * cfg.delta, from.len()))
}

/// Forward branch `θ + ε·ĝ + (√(2ε)/n)·Z`.
pub fn sgld_move(theta: &[f64], grad: &[f64], cfg: &RsgldConfig, z: &[f64]) -> Result<ParamVector> {
    rsgld_move(theta, grad, cfg, Direction::Forward, z)
}

pub fn propose_sgld<R: Rng + ?Sized>(
    theta: &[f64],
    grad: &[f64],
    cfg: &RsgldConfig,
    rng: &mut R,
) -> Result<ParamVector> {
    check_finite("gradient", grad)?;
    let z = normal_draw(theta.len(), rng);
    sgld_move(theta, grad, cfg, &z)
}

/// One RSGLD branch with an explicit noise draw. `Symmetric` is rejected.
pub fn rsgld_move(
    theta: &[f64],
    grad: &[f64],
    cfg: &RsgldConfig,
    direction: Direction,
    z: &[f64],
) -> Result<ParamVector> {
    check_len("gradient", theta.len(), grad)?;
    check_len("noise", theta.len(), z)?;
    check_finite("gradient", grad)?;
    let s = cfg.noise_scale();
    let (sign, scale) = match direction {
        Direction::Forward => (1.0, s),
        Direction::Backward => (-1.0, s * cfg.beta),
        Direction::Symmetric => return Err(Error::contract("RSGLD has no symmetric branch")),
    };
    ParamVector::new(
        theta
            .iter()
            .zip(grad)
            .zip(z)
            .map(|((t, g), z)| t + sign * cfg.epsilon * g + scale * z)
            .collect(),
    )
}

/// Fair coin for the branch, then the Gaussian draw.
pub fn propose_rsgld<R: Rng + ?Sized>(
    theta: &[f64],
    grad: &[f64],
    cfg: &RsgldConfig,
    rng: &mut R,
) -> Result<(ParamVector, Direction)> {
    check_finite("gradient", grad)?;
    let direction = if rng.random::<bool>() {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let z = normal_draw(theta.len(), rng);
    Ok((rsgld_move(theta, grad, cfg, direction, &z)?, direction))
}

/// Squared norms `‖Δ − εĝ‖²` and `‖Δ + εĝ‖²` for `Δ = θ_to − θ_from`.
fn branch_sq_norms(from: &[f64], to: &[f64], grad: &[f64], eps: f64) -> (f64, f64) {
    let mut fwd = 0.0;
    let mut bwd = 0.0;
    for ((a, b), g) in from.iter().zip(to).zip(grad) {
        let delta = b - a;
        let step = eps * g;
        fwd += (delta - step) * (delta - step);
        bwd += (delta + step) * (delta + step);
    }
    (fwd, bwd)
}

fn check_density_args(from: &[f64], to: &[f64], grad: &[f64]) -> Result<()> {
    check_len("theta_to", from.len(), to)?;
    check_len("gradient", from.len(), grad)?;
    check_finite("theta_from", from)?;
    check_finite("theta_to", to)?;
    check_finite("gradient", grad)
}

/// Single-Gaussian SGLD density `log φ(θ_to − θ_from − εĝ; (2ε/n²) I)`.
pub fn log_density_sgld(from: &[f64], to: &[f64], grad: &[f64], cfg: &RsgldConfig) -> Result<f64> {
    check_density_args(from, to, grad)?;
    let (fwd, _) = branch_sq_norms(from, to, grad, cfg.epsilon);
    let s = cfg.noise_scale();
    Ok(log_normal_iso(fwd, s * s, from.len()))
}

/// Log density of the two-branch mixture
/// `½ φ(Δ − εĝ; s² I) + ½ φ(Δ + εĝ; β²s² I)` with `s = √(2ε)/n`.
pub fn log_density_rsgld(from: &[f64], to: &[f64], grad: &[f64], cfg: &RsgldConfig) -> Result<f64> {
    check_density_args(from, to, grad)?;
    let (fwd, bwd) = branch_sq_norms(from, to, grad, cfg.epsilon);
    let s2 = cfg.noise_scale().powi(2);
    let d = from.len();
    let a = log_normal_iso(fwd, s2, d);
    let b = log_normal_iso(bwd, s2 * cfg.beta * cfg.beta, d);
    Ok(log_add_exp(a, b) - std::f64::consts::LN_2)
}

/// `log q_J(θ′ → θ) − log q_I(θ → θ′)`: `grad_i` is the current batch's
/// gradient at θ, `grad_j` the proposed batch's gradient at θ′.
pub fn log_proposal_ratio(
    theta: &[f64],
    theta_new: &[f64],
    grad_i: &[f64],
    grad_j: &[f64],
    cfg: &RsgldConfig,
) -> Result<f64> {
    Ok(log_density_rsgld(theta_new, theta, grad_j, cfg)?
        - log_density_rsgld(theta, theta_new, grad_i, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn normal_pdf(x: f64, var: f64) -> f64 {
        (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn config_validation() {
        assert!(RwConfig::new(0.0).is_err());
        assert!(RsgldConfig::new(0.01, 0.9, 10).is_err());
        assert!(RsgldConfig::new(-1.0, 1.0, 10).is_err());
        assert!(RsgldConfig::new(0.01, 1.0, 0).is_err());
        assert!(RsgldConfig::new(0.01, 1.0, 10).unwrap().validate().is_ok());
    }

    #[test]
    fn random_walk_moments_and_reproducibility() {
        let cfg = RwConfig::new(1.0).unwrap();
        let a = propose_rw(&[0.0], &cfg, &mut stream(3, 0)).unwrap();
        let b = propose_rw(&[0.0], &cfg, &mut stream(3, 0)).unwrap();
        assert_eq!(a, b);
        let mut rng = stream(4, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| propose_rw(&[0.0], &cfg, &mut rng).unwrap()[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn random_walk_is_symmetric() {
        let cfg = RwConfig::new(0.3).unwrap();
        let mut rng = stream(5, 0);
        for _ in 0..100 {
            let theta = [0.2, -1.0, 3.0];
            let to = propose_rw(&theta, &cfg, &mut rng).unwrap();
            let f = log_density_rw(&theta, &to, &cfg).unwrap();
            let r = log_density_rw(&to, &theta, &cfg).unwrap();
            assert!((f - r).abs() < 1e-12);
        }
        assert_eq!(Proposal::RandomWalk(cfg).log_ratio(&[0.0], &[1.0], None, None).unwrap(), 0.0);
    }

    #[test]
    fn sgld_plug_in_values() {
        let cfg = RsgldConfig::new(0.01, 1.0, 10_000).unwrap();
        let out = sgld_move(&[1.0], &[5.0], &cfg, &[0.0]).unwrap();
        assert!((out[0] - 1.05).abs() < 1e-15);
        let out = sgld_move(&[0.0], &[0.0], &cfg, &[1.0]).unwrap();
        assert_eq!(out[0], cfg.noise_scale());
        assert!(propose_sgld(&[0.0], &[f64::NAN], &cfg, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn sgld_mean_within_three_standard_errors() {
        let cfg = RsgldConfig::new(0.5, 1.0, 10).unwrap();
        let mut rng = stream(6, 0);
        let k = 100_000;
        let mean = (0..k)
            .map(|_| propose_sgld(&[1.0], &[2.0], &cfg, &mut rng).unwrap()[0])
            .sum::<f64>()
            / k as f64;
        let se = cfg.noise_scale() / (k as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn rsgld_branch_plug_in() {
        let cfg = RsgldConfig::new(0.02, 2.0, 10_000).unwrap();
        let out = rsgld_move(&[0.5], &[3.0], &cfg, Direction::Backward, &[1.0]).unwrap();
        let expected = 0.5 - 0.06 + 2.0 * (0.04f64.sqrt() / 1e4);
        assert!((out[0] - expected).abs() < 1e-15);
        assert!(rsgld_move(&[0.5], &[3.0], &cfg, Direction::Symmetric, &[1.0]).is_err());
    }

    #[test]
    fn rsgld_coin_is_fair() {
        let cfg = RsgldConfig::new(0.01, 2.0, 100).unwrap();
        let mut rng = stream(7, 0);
        let k = 100_000;
        let forward = (0..k)
            .filter(|_| propose_rsgld(&[0.0], &[1.0], &cfg, &mut rng).unwrap().1 == Direction::Forward)
            .count();
        let frac = forward as f64 / k as f64;
        assert!((0.495..=0.505).contains(&frac), "{frac}");
    }

    #[test]
    fn rsgld_branches_collapse_without_gradient() {
        let cfg = RsgldConfig::new(0.01, 1.0, 100).unwrap();
        let z = [0.3, -1.2];
        let f = rsgld_move(&[1.0, 2.0], &[0.0, 0.0], &cfg, Direction::Forward, &z).unwrap();
        let b = rsgld_move(&[1.0, 2.0], &[0.0, 0.0], &cfg, Direction::Backward, &z).unwrap();
        assert_eq!(f, b);
        let to = [1.001, 1.999];
        let single = log_normal_iso(1e-6 + 1e-6, cfg.noise_scale().powi(2), 2);
        let mix = log_density_rsgld(&[1.0, 2.0], &to, &[0.0, 0.0], &cfg).unwrap();
        assert!((mix - single).abs() < 1e-12);
    }

    #[test]
    fn rsgld_density_matches_scalar_oracle() {
        let (eps, g, n, beta) = (0.01, 2.0, 100, 2.0);
        let cfg = RsgldConfig::new(eps, beta, n).unwrap();
        let v = 2.0 * eps / (n * n) as f64;
        let oracle = (0.5 * normal_pdf(0.0, v) + 0.5 * normal_pdf(2.0 * eps * g, v * beta * beta)).ln();
        let got = log_density_rsgld(&[0.0], &[eps * g], &[g], &cfg).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    /// Trapezoid rule over a window covering both branches.
    fn quadrature(cfg: &RsgldConfig, from: f64, g: f64) -> f64 {
        let s = cfg.beta * cfg.noise_scale();
        let shift = cfg.epsilon * g.abs();
        let (lo, hi) = (from - shift - 10.0 * s, from + shift + 10.0 * s);
        let k = 200_000;
        let h = (hi - lo) / k as f64;
        let f = |x: f64| log_density_rsgld(&[from], &[x], &[g], cfg).unwrap().exp();
        let inner: f64 = (1..k).map(|i| f(lo + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn rsgld_density_normalizes() {
        let cfg = RsgldConfig::new(0.01, 2.0, 100).unwrap();
        assert!((quadrature(&cfg, 0.3, 2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn density_stays_finite_far_from_the_mean() {
        let cfg = RsgldConfig::new(1e-4, 3.0, 1000).unwrap();
        let far = 1e3 * cfg.noise_scale();
        let v = log_density_rsgld(&[0.0], &[far], &[0.0], &cfg).unwrap();
        assert!(v.is_finite() && v < 0.0);
        let v = log_density_rsgld(&[0.0], &[1e6], &[1.0], &cfg).unwrap();
        assert!(v.is_finite());
        assert!(log_density_rsgld(&[0.0], &[f64::INFINITY], &[1.0], &cfg).is_err());
    }

    #[test]
    fn flat_region_ratio_is_exactly_zero() {
        let cfg = RsgldConfig::new(0.01, 2.0, 100).unwrap();
        let r = log_proposal_ratio(&[0.1, 0.2], &[0.15, 0.1], &[0.0, 0.0], &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(r, 0.0);
        let r = log_proposal_ratio(&[0.1], &[0.1], &[0.0], &[0.0], &cfg).unwrap();
        assert_eq!(r, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn normalization_holds_for_random_configs(
            eps in 1e-4f64..0.1, beta in 1.0f64..4.0, g in -5.0f64..5.0, n in 10usize..1000,
        ) {
            let cfg = RsgldConfig::new(eps, beta, n).unwrap();
            prop_assert!((quadrature(&cfg, -0.4, g) - 1.0).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn unit_beta_zero_gradient_ratio_vanishes(
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            b in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let cfg = RsgldConfig::new(0.05, 1.0, 50).unwrap();
            let zero = [0.0; 3];
            prop_assert_eq!(log_proposal_ratio(&a, &b, &zero, &zero, &cfg).unwrap(), 0.0);
        }
    }
}
