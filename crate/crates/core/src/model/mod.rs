//! Likelihood families, datasets and synthetic data generation.
//!
//! A [`ModelSpec`] supplies per-record log-likelihoods `ℓᵢ(θ)` and their exact
//! gradients. Batch means over a [`BatchIndex`] are the quantities the sampler
//! tempers: `μ̂_I(θ) = (1/|I|) Σ_{i∈I} ℓᵢ(θ)`.

mod data;
mod gaussian;
mod mixture;
mod mlp;

pub use data::{fmt_f64, Dataset, Record};
pub use gaussian::GaussianForm;
pub use mlp::MlpLayout;

use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::BatchIndex;
use crate::error::{Error, Result};
use crate::rng;

/// A finite, non-empty real parameter vector θ ∈ ℝᵈ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::contract("parameter vector must have d >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "parameter vector entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(ParamVector(values))
    }

    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        Self::filled(dim, 0.0)
    }

    /// # Panics
    /// If `dim == 0` or `value` is not finite.
    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(dim >= 1 && value.is_finite());
        ParamVector(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sq_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamVector::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Vec<f64> {
        p.0
    }
}

/// The supported likelihood families and their hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum ModelSpec {
    /// `x ~ N(θ, σ² I_d)` with known variance σ².
    #[serde(rename = "gaussian-mean")]
    GaussianMean {
        dim: usize,
        variance: f64,
        #[serde(default)]
        form: GaussianForm,
    },
    /// `x ~ ½ N(θ₁, σ_x²) + ½ N(θ₁+θ₂, σ_x²)`. The prior variances `var_1`,
    /// `var_2` only enter reference posteriors, never the sampler.
    #[serde(rename = "gaussian-mixture-2")]
    GaussianMixture2 { var_x: f64, var_1: f64, var_2: f64 },
    /// Fully connected sigmoid network with a softmax output; the record
    /// log-likelihood is the negative cross entropy of its label.
    #[serde(rename = "softmax-mlp")]
    SoftmaxMlp {
        input: usize,
        hidden: Vec<usize>,
        classes: usize,
    },
}

impl ModelSpec {
    pub fn gaussian_mean(dim: usize, variance: f64) -> Self {
        ModelSpec::GaussianMean {
            dim,
            variance,
            form: GaussianForm::Density,
        }
    }

    /// Gaussian mean family without the θ-independent base measure.
    pub fn gaussian_mean_natural(dim: usize, variance: f64) -> Self {
        ModelSpec::GaussianMean {
            dim,
            variance,
            form: GaussianForm::Natural,
        }
    }

    pub fn gaussian_mixture(var_x: f64, var_1: f64, var_2: f64) -> Self {
        ModelSpec::GaussianMixture2 { var_x, var_1, var_2 }
    }

    pub fn softmax_mlp(input: usize, hidden: Vec<usize>, classes: usize) -> Self {
        ModelSpec::SoftmaxMlp {
            input,
            hidden,
            classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            ModelSpec::GaussianMean { dim, variance, .. } => {
                if *dim == 0 {
                    return Err(Error::config("gaussian-mean dim must be >= 1"));
                }
                positive("variance", *variance)
            }
            ModelSpec::GaussianMixture2 { var_x, var_1, var_2 } => {
                positive("var_x", *var_x)?;
                positive("var_1", *var_1)?;
                positive("var_2", *var_2)
            }
            ModelSpec::SoftmaxMlp {
                input,
                hidden,
                classes,
            } => {
                if *input == 0 || hidden.iter().any(|&w| w == 0) {
                    return Err(Error::config("MLP layer widths must be >= 1"));
                }
                if *classes < 2 {
                    return Err(Error::config("softmax-mlp needs at least 2 classes"));
                }
                Ok(())
            }
        }
    }

    /// Dimension d of θ.
    pub fn param_dim(&self) -> usize {
        match self {
            ModelSpec::GaussianMean { dim, .. } => *dim,
            ModelSpec::GaussianMixture2 { .. } => 2,
            ModelSpec::SoftmaxMlp { .. } => self.mlp_layout().param_count(),
        }
    }

    /// Feature width p of one record.
    pub fn record_width(&self) -> usize {
        match self {
            ModelSpec::GaussianMean { dim, .. } => *dim,
            ModelSpec::GaussianMixture2 { .. } => 1,
            ModelSpec::SoftmaxMlp { input, .. } => *input,
        }
    }

    /// Number of classes for labelled families.
    pub fn classes(&self) -> Option<usize> {
        match self {
            ModelSpec::SoftmaxMlp { classes, .. } => Some(*classes),
            _ => None,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::GaussianMean { .. } => "gaussian-mean",
            ModelSpec::GaussianMixture2 { .. } => "gaussian-mixture-2",
            ModelSpec::SoftmaxMlp { .. } => "softmax-mlp",
        }
    }

    /// Layer layout of the softmax-mlp family.
    ///
    /// # Panics
    /// For any other family.
    pub fn mlp_layout(&self) -> MlpLayout {
        match self {
            ModelSpec::SoftmaxMlp {
                input,
                hidden,
                classes,
            } => MlpLayout::new(*input, hidden, *classes),
            _ => panic!("mlp_layout called on {}", self.family_name()),
        }
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let expected = self.param_dim();
        if theta.len() != expected {
            return Err(Error::Dimension {
                what: "theta",
                expected,
                actual: theta.len(),
            });
        }
        Ok(())
    }

    fn check_record(&self, record: &Record<'_>) -> Result<()> {
        let expected = self.record_width();
        if record.features.len() != expected {
            return Err(Error::Dimension {
                what: "record",
                expected,
                actual: record.features.len(),
            });
        }
        if let Some(k) = self.classes() {
            match record.label {
                Some(l) if (l as usize) < k => {}
                Some(l) => {
                    return Err(Error::contract(format!("label {l} outside [0, {k})")));
                }
                None => return Err(Error::contract("softmax-mlp records need a label")),
            }
        }
        Ok(())
    }

    /// Checks that `data` can be evaluated by this model.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.width() != self.record_width() {
            return Err(Error::Dimension {
                what: "dataset width",
                expected: self.record_width(),
                actual: data.width(),
            });
        }
        if let Some(k) = self.classes() {
            let labels = data
                .labels()
                .ok_or_else(|| Error::contract("softmax-mlp datasets need labels"))?;
            if let Some(l) = labels.iter().find(|&&l| l as usize >= k) {
                return Err(Error::contract(format!("label {l} outside [0, {k})")));
            }
        }
        Ok(())
    }

    /// `ℓ(θ) = log p(record | θ)`.
    pub fn log_lik(&self, theta: &[f64], record: Record<'_>) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_record(&record)?;
        Ok(self.record_log_lik(theta, record))
    }

    /// Exact gradient of [`ModelSpec::log_lik`] with respect to θ.
    pub fn grad_log_lik(&self, theta: &[f64], record: Record<'_>) -> Result<ParamVector> {
        self.check_theta(theta)?;
        self.check_record(&record)?;
        let mut grad = vec![0.0; theta.len()];
        self.accumulate_record(theta, record, &mut grad);
        ParamVector::new(grad)
    }

    fn record_log_lik(&self, theta: &[f64], record: Record<'_>) -> f64 {
        match self {
            ModelSpec::GaussianMean { variance, form, .. } => {
                gaussian::log_lik(theta, record.features, *variance, *form)
            }
            ModelSpec::GaussianMixture2 { var_x, .. } => {
                mixture::log_lik(theta, record.features[0], *var_x)
            }
            ModelSpec::SoftmaxMlp { .. } => {
                let layout = self.mlp_layout();
                let mut scratch = layout.scratch();
                layout.log_lik(theta, record.features, record.label.unwrap_or(0), &mut scratch)
            }
        }
    }

    /// Adds `∇ℓ(θ)` of one record into `grad` and returns `ℓ(θ)`.
    fn accumulate_record(&self, theta: &[f64], record: Record<'_>, grad: &mut [f64]) -> f64 {
        match self {
            ModelSpec::GaussianMean { variance, form, .. } => {
                gaussian::accumulate(theta, record.features, *variance, *form, grad)
            }
            ModelSpec::GaussianMixture2 { var_x, .. } => {
                mixture::accumulate(theta, record.features[0], *var_x, grad)
            }
            ModelSpec::SoftmaxMlp { .. } => {
                let layout = self.mlp_layout();
                let mut scratch = layout.scratch();
                layout.accumulate(
                    theta,
                    record.features,
                    record.label.unwrap_or(0),
                    &mut scratch,
                    grad,
                )
            }
        }
    }

    fn check_batch(&self, theta: &[f64], data: &Dataset, batch: &BatchIndex) -> Result<()> {
        self.check_theta(theta)?;
        if batch.population() != data.len() {
            return Err(Error::contract(format!(
                "batch drawn from [0, {}) but dataset has {} records",
                batch.population(),
                data.len()
            )));
        }
        if data.width() != self.record_width() {
            return Err(Error::Dimension {
                what: "dataset width",
                expected: self.record_width(),
                actual: data.width(),
            });
        }
        Ok(())
    }

    /// `μ̂_I(θ)`, the mean record log-likelihood over the batch.
    pub fn batch_mean_loglik(
        &self,
        theta: &[f64],
        data: &Dataset,
        batch: &BatchIndex,
    ) -> Result<f64> {
        self.check_batch(theta, data, batch)?;
        let sum = match self {
            ModelSpec::GaussianMean { variance, form, .. } if batch.is_full() => {
                return Ok(gaussian::full_mean_log_lik(theta, data, *variance, *form));
            }
            ModelSpec::GaussianMean { variance, form, .. } => batch
                .iter()
                .map(|i| gaussian::log_lik(theta, data.row(i), *variance, *form))
                .sum::<f64>(),
            ModelSpec::GaussianMixture2 { var_x, .. } if batch.is_full() => {
                mixture::sum_log_lik(theta, data.values().iter().copied(), *var_x)
            }
            ModelSpec::GaussianMixture2 { var_x, .. } => {
                mixture::sum_log_lik(theta, batch.iter().map(|i| data.row(i)[0]), *var_x)
            }
            ModelSpec::SoftmaxMlp { .. } => {
                let layout = self.mlp_layout();
                let mut scratch = layout.scratch();
                let labels = data.labels().ok_or_else(|| Error::contract("missing labels"))?;
                batch
                    .iter()
                    .map(|i| layout.log_lik(theta, data.row(i), labels[i], &mut scratch))
                    .sum::<f64>()
            }
        };
        Ok(sum / batch.len() as f64)
    }

    /// `ĝ_I(θ)`, the mean record gradient over the batch.
    pub fn batch_mean_grad(
        &self,
        theta: &[f64],
        data: &Dataset,
        batch: &BatchIndex,
    ) -> Result<ParamVector> {
        Ok(self.batch_mean_loglik_and_grad(theta, data, batch)?.1)
    }

    /// `(μ̂_I(θ), ĝ_I(θ))` computed in a single pass over the batch.
    pub fn batch_mean_loglik_and_grad(
        &self,
        theta: &[f64],
        data: &Dataset,
        batch: &BatchIndex,
    ) -> Result<(f64, ParamVector)> {
        self.check_batch(theta, data, batch)?;
        let mut grad = vec![0.0; theta.len()];
        let inv = 1.0 / batch.len() as f64;
        let sum = match self {
            ModelSpec::GaussianMean { variance, form, .. } if batch.is_full() => {
                let mean = gaussian::full_mean_log_lik(theta, data, *variance, *form);
                gaussian::full_mean_grad(theta, data, *variance, &mut grad);
                return Ok((mean, ParamVector::new(grad)?));
            }
            ModelSpec::GaussianMean { variance, form, .. } => batch
                .iter()
                .map(|i| gaussian::accumulate(theta, data.row(i), *variance, *form, &mut grad))
                .sum::<f64>(),
            ModelSpec::GaussianMixture2 { var_x, .. } => batch
                .iter()
                .map(|i| mixture::accumulate(theta, data.row(i)[0], *var_x, &mut grad))
                .sum::<f64>(),
            ModelSpec::SoftmaxMlp { .. } => {
                let layout = self.mlp_layout();
                let mut scratch = layout.scratch();
                let labels = data.labels().ok_or_else(|| Error::contract("missing labels"))?;
                batch
                    .iter()
                    .map(|i| {
                        layout.accumulate(theta, data.row(i), labels[i], &mut scratch, &mut grad)
                    })
                    .sum::<f64>()
            }
        };
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((sum * inv, ParamVector::new(grad)?))
    }

    /// Full-data mean log-likelihood `μ(θ)`.
    pub fn full_mean_loglik(&self, theta: &[f64], data: &Dataset) -> Result<f64> {
        self.batch_mean_loglik(theta, data, &BatchIndex::full(data.len()))
    }

    /// Draws `n` i.i.d. records from `p(·|θ*)`; deterministic given `seed`.
    pub fn generate_data(&self, theta_star: &[f64], n: usize, seed: u64) -> Result<Dataset> {
        self.validate()?;
        self.check_theta(theta_star)?;
        if n == 0 {
            return Err(Error::contract("generate_data needs n >= 1"));
        }
        let mut rng = rng::stream(seed, rng::DATA_STREAM);
        match self {
            ModelSpec::GaussianMean { dim, variance, .. } => {
                let sd = variance.sqrt();
                let values = (0..n)
                    .flat_map(|_| theta_star.iter().map(|&m| m + sd * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>())
                    .collect();
                Dataset::new(*dim, values, None)
            }
            ModelSpec::GaussianMixture2 { var_x, .. } => {
                let sd = var_x.sqrt();
                let values = (0..n)
                    .map(|_| {
                        let centre = if rng.random::<f64>() < 0.5 {
                            theta_star[0]
                        } else {
                            theta_star[0] + theta_star[1]
                        };
                        centre + sd * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect();
                Dataset::new(1, values, None)
            }
            ModelSpec::SoftmaxMlp { input, classes, .. } => {
                let layout = self.mlp_layout();
                let mut scratch = layout.scratch();
                let mut values = Vec::with_capacity(n * input);
                let mut labels = Vec::with_capacity(n);
                for _ in 0..n {
                    let x: Vec<f64> = (0..*input).map(|_| rng.sample(StandardNormal)).collect();
                    let probs = layout.probabilities(theta_star, &x, &mut scratch);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut label = classes - 1;
                    for (k, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            label = k;
                            break;
                        }
                    }
                    values.extend_from_slice(&x);
                    labels.push(label as u32);
                }
                Dataset::new(*input, values, Some(labels))
            }
        }
    }
}
