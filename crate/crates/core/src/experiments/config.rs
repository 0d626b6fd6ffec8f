use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, GaussianForm, ModelSpec, ParamVector};
use crate::proposals::{Proposal, RsgldConfig, RwConfig};
use crate::sampler::TemperSpec;

/// The harness experiments, named as on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GaussianConvergence,
    MixtureTraveling,
    AcceptanceScaling,
    ToyNn,
    TuneDelta,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::GaussianConvergence,
        ExperimentKind::MixtureTraveling,
        ExperimentKind::AcceptanceScaling,
        ExperimentKind::ToyNn,
        ExperimentKind::TuneDelta,
        ExperimentKind::OracleCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::GaussianConvergence => "gaussian-convergence",
            ExperimentKind::MixtureTraveling => "mixture-traveling",
            ExperimentKind::AcceptanceScaling => "acceptance-scaling",
            ExperimentKind::ToyNn => "toy-nn",
            ExperimentKind::TuneDelta => "tune-delta",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown experiment `{s}`")))
    }
}

/// Where the records come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    /// `n` draws from the model at `theta_star`; an empty `theta_star` means
    /// the origin.
    Generated { theta_star: Vec<f64>, n: usize, seed: u64 },
    /// Labelled points drawn uniformly from non-overlapping balls, one per
    /// class, so the classes are separable by construction.
    Clusters {
        n: usize,
        test_n: usize,
        /// Distance of each ball centre from the origin.
        radius: f64,
        /// Ball radius; must stay below `radius·sin(π/K)`.
        spread: f64,
        seed: u64,
    },
    /// A CSV written by [`Dataset::write_csv`].
    File { path: PathBuf },
}

impl DataSpec {
    pub fn n(&self) -> Result<usize> {
        match self {
            DataSpec::Generated { n, .. } | DataSpec::Clusters { n, .. } => Ok(*n),
            DataSpec::File { path } => Ok(Dataset::load(path)?.len()),
        }
    }

    /// `theta_star` padded to `dim` when empty.
    pub fn theta_star(&self, dim: usize) -> Option<Vec<f64>> {
        match self {
            DataSpec::Generated { theta_star, .. } if theta_star.is_empty() => Some(vec![0.0; dim]),
            DataSpec::Generated { theta_star, .. } => Some(theta_star.clone()),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperSection {
    pub m: usize,
    pub c_n: f64,
}

impl TemperSection {
    pub fn spec(&self, n: usize) -> Result<TemperSpec> {
        TemperSpec::new(n, self.m, self.c_n)
    }
}

/// Bisection on `log δ` for a target random-walk acceptance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSection {
    /// Tune δ before running; otherwise the proposal's δ is used as given.
    pub enabled: bool,
    pub target_accept: f64,
    pub tolerance: f64,
    pub pilot_iterations: u64,
    pub max_bisections: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Default for TuningSection {
    fn default() -> Self {
        TuningSection {
            enabled: true,
            target_accept: 0.3,
            tolerance: 0.05,
            pilot_iterations: 2000,
            max_bisections: 20,
            lower: 1e-8,
            upper: 1e2,
        }
    }
}

impl TuningSection {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::config(format!("target_accept must lie in (0, 1), got {}", self.target_accept)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config(format!("tuning tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        if !(self.lower > 0.0 && self.lower < self.upper && self.upper.is_finite()) {
            return Err(Error::config(format!(
                "tuning bracket must satisfy 0 < lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if self.pilot_iterations == 0 {
            return Err(Error::config("pilot_iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Initial θ of every chain; empty means the origin.
    pub start: Vec<f64>,
    /// Iterations at which TV is measured, strictly increasing.
    pub checkpoints: Vec<u64>,
    /// Histogram bins per dimension.
    pub bins: usize,
    pub reference_draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    /// Initial θ of both chains; empty means `theta_star`.
    pub start: Vec<f64>,
    /// Mode-ball radius as a fraction of the distance between the centres.
    pub radius_fraction: f64,
    /// Scale of the full-batch chain's target; absent means `n`, i.e. the
    /// untempered posterior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_batch_c_n: Option<f64>,
    pub full_batch_iterations: u64,
    /// Cells per axis of the scatter-density grid.
    pub grid_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub dims: Vec<usize>,
    pub variance: f64,
    pub form: GaussianForm,
    /// `ε_j = d^{-1/4} n^{-1} 10^{j / points_per_decade}` for `j` in
    /// `grid_min..=grid_max`.
    pub grid_min: i32,
    pub grid_max: i32,
    pub points_per_decade: u32,
    pub betas: Vec<f64>,
}

impl ScalingSection {
    pub fn epsilons(&self, d: usize, n: usize) -> Vec<f64> {
        let base = (d as f64).powf(-0.25) / n as f64;
        (self.grid_min..=self.grid_max)
            .map(|j| base * 10f64.powf(j as f64 / self.points_per_decade as f64))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyNnSection {
    pub epochs: usize,
    /// Standard deviation of the N(0, s²) weight initialisation.
    pub init_sd: f64,
    /// Forward probes per β-schedule phase step.
    pub probe_steps: usize,
    /// Also train the SGD and SGLD baselines at the same ε.
    pub baselines: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub ns: Vec<usize>,
    pub grid_sizes: Vec<usize>,
    /// The grid spans `[-half_width, half_width]`.
    pub half_width: f64,
    pub tolerance: f64,
    pub balance_tolerance: f64,
}

/// A complete, resolved experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub chains: usize,
    pub iterations: u64,
    pub thin: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temper: Option<TemperSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy_nn: Option<ToyNnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

fn default_checkpoints() -> Vec<u64> {
    vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000]
}

impl ExperimentConfig {
    /// The full default configuration of `kind`. Protocol constants follow
    /// the published experiments; see `configs/` for the annotated files.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            seed: 20_240_601,
            out_dir: PathBuf::from(format!("out/{}", kind.as_str())),
            chains: 1,
            iterations: 2000,
            thin: 1,
            model: None,
            data: None,
            temper: None,
            proposal: None,
            tuning: None,
            convergence: None,
            mixture: None,
            scaling: None,
            toy_nn: None,
            oracle: None,
        };
        match kind {
            ExperimentKind::GaussianConvergence => ExperimentConfig {
                chains: 10_000,
                model: Some(ModelSpec::gaussian_mean(2, 1.0)),
                data: Some(DataSpec::Generated {
                    theta_star: vec![2.0, 2.0],
                    n: 100_000,
                    seed: 1,
                }),
                temper: Some(TemperSection { m: 1000, c_n: 20.0 }),
                proposal: Some(Proposal::RandomWalk(RwConfig { delta: 0.1 })),
                tuning: Some(TuningSection::default()),
                convergence: Some(ConvergenceSection {
                    start: Vec::new(),
                    checkpoints: default_checkpoints(),
                    bins: 20,
                    reference_draws: 100_000,
                }),
                ..base
            },
            ExperimentKind::MixtureTraveling => ExperimentConfig {
                iterations: 100_000,
                thin: 10,
                model: Some(ModelSpec::gaussian_mixture(2.0, 10.0, 1.0)),
                data: Some(DataSpec::Generated {
                    theta_star: vec![0.0, 4.0],
                    n: 100_000,
                    seed: 1,
                }),
                temper: Some(TemperSection { m: 1000, c_n: 20.0 }),
                proposal: Some(Proposal::RandomWalk(RwConfig { delta: 0.1 })),
                tuning: Some(TuningSection::default()),
                mixture: Some(MixtureSection {
                    start: Vec::new(),
                    radius_fraction: 0.4,
                    full_batch_c_n: None,
                    full_batch_iterations: 100_000,
                    grid_bins: 40,
                }),
                ..base
            },
            ExperimentKind::AcceptanceScaling => ExperimentConfig {
                data: Some(DataSpec::Generated {
                    theta_star: Vec::new(),
                    n: 10_000,
                    seed: 1,
                }),
                temper: Some(TemperSection { m: 1000, c_n: 20.0 }),
                scaling: Some(ScalingSection {
                    dims: vec![10, 100, 1000],
                    variance: 1.0,
                    form: GaussianForm::Natural,
                    grid_min: -32,
                    grid_max: 0,
                    points_per_decade: 8,
                    betas: vec![1.0, 2.0],
                }),
                ..base
            },
            ExperimentKind::ToyNn => ExperimentConfig {
                iterations: 0,
                model: Some(ModelSpec::softmax_mlp(2, vec![16], 3)),
                data: Some(DataSpec::Clusters {
                    n: 3000,
                    test_n: 1000,
                    radius: 3.0,
                    spread: 1.5,
                    seed: 1,
                }),
                temper: Some(TemperSection { m: 100, c_n: 100.0 }),
                proposal: Some(Proposal::Rsgld(RsgldConfig {
                    epsilon: 0.3,
                    beta: 2.0,
                    n: 3000,
                })),
                toy_nn: Some(ToyNnSection {
                    epochs: 200,
                    init_sd: 0.03,
                    probe_steps: 100,
                    baselines: true,
                }),
                ..base
            },
            ExperimentKind::TuneDelta => ExperimentConfig {
                model: Some(ModelSpec::gaussian_mean(2, 1.0)),
                data: Some(DataSpec::Generated {
                    theta_star: vec![2.0, 2.0],
                    n: 100_000,
                    seed: 1,
                }),
                temper: Some(TemperSection { m: 1000, c_n: 20.0 }),
                proposal: Some(Proposal::RandomWalk(RwConfig { delta: 0.1 })),
                tuning: Some(TuningSection::default()),
                ..base
            },
            ExperimentKind::OracleCheck => ExperimentConfig {
                oracle: Some(OracleSection {
                    ns: vec![3, 4],
                    grid_sizes: vec![3, 5, 7],
                    half_width: 1.0,
                    tolerance: 1e-10,
                    balance_tolerance: 1e-12,
                }),
                ..base
            },
        }
    }

    /// Parses and validates a TOML file over the defaults of its
    /// `experiment`. Unknown keys are errors.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let kind = match user.get("experiment") {
            Some(toml::Value::String(s)) => s.parse::<ExperimentKind>()?,
            Some(_) => return Err(Error::config("`experiment` must be a string")),
            None => return Err(Error::config("missing `experiment` key")),
        };
        Self::over_defaults(kind, user)
    }

    /// Like [`from_toml_str`](Self::from_toml_str) but with the experiment
    /// fixed by the caller; a conflicting `experiment` key is an error.
    pub fn from_toml_for(kind: ExperimentKind, text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        if let Some(v) = user.get("experiment") {
            if v.as_str() != Some(kind.as_str()) {
                return Err(Error::config(format!(
                    "config is for experiment {v} but `{}` was requested",
                    kind.as_str()
                )));
            }
        }
        Self::over_defaults(kind, user)
    }

    fn over_defaults(kind: ExperimentKind, user: toml::Table) -> Result<Self> {
        let defaults = toml::Table::try_from(Self::defaults(kind)).map_err(|e| Error::Parse(e.to_string()))?;
        let merged = merge(defaults, user);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(merged))
            .map_err(|e| Error::config(format!("at `{}`: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML config, or the config recorded in a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            return Ok(super::RunManifest::from_json(&text)?.config);
        }
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    fn need<'a, T>(&self, v: &'a Option<T>, key: &str) -> Result<&'a T> {
        v.as_ref()
            .ok_or_else(|| Error::config(format!("experiment {} needs a `{key}` section", self.experiment.as_str())))
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.need(&self.model, "model")
    }

    pub fn data_spec(&self) -> Result<&DataSpec> {
        self.need(&self.data, "data")
    }

    pub fn temper(&self) -> Result<&TemperSection> {
        self.need(&self.temper, "temper")
    }

    pub fn proposal(&self) -> Result<&Proposal> {
        self.need(&self.proposal, "proposal")
    }

    pub fn tuning(&self) -> Result<&TuningSection> {
        self.need(&self.tuning, "tuning")
    }

    pub fn convergence(&self) -> Result<&ConvergenceSection> {
        self.need(&self.convergence, "convergence")
    }

    pub fn mixture(&self) -> Result<&MixtureSection> {
        self.need(&self.mixture, "mixture")
    }

    pub fn scaling(&self) -> Result<&ScalingSection> {
        self.need(&self.scaling, "scaling")
    }

    pub fn toy_nn(&self) -> Result<&ToyNnSection> {
        self.need(&self.toy_nn, "toy_nn")
    }

    pub fn oracle(&self) -> Result<&OracleSection> {
        self.need(&self.oracle, "oracle")
    }

    /// Builds (or loads) the training data.
    pub fn dataset(&self) -> Result<Dataset> {
        match self.data_spec()? {
            DataSpec::Generated { n, seed, .. } => {
                let model = self.model()?;
                let theta_star = self.theta_star()?;
                model.generate_data(&theta_star, *n, *seed)
            }
            DataSpec::Clusters { .. } => Ok(super::toy_nn::cluster_data(self)?.0),
            DataSpec::File { path } => Dataset::load(path),
        }
    }

    pub fn theta_star(&self) -> Result<Vec<f64>> {
        let dim = self.model()?.param_dim();
        self.data_spec()?
            .theta_star(dim)
            .ok_or_else(|| Error::config("the data source has no theta_star"))
    }

    /// Checks everything that can be checked before a chain starts.
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::config("chains must be >= 1"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be >= 1"));
        }
        let defaults = Self::defaults(self.experiment);
        let sections = [
            ("model", self.model.is_some(), defaults.model.is_some()),
            ("data", self.data.is_some(), defaults.data.is_some()),
            ("temper", self.temper.is_some(), defaults.temper.is_some()),
            ("proposal", self.proposal.is_some(), defaults.proposal.is_some()),
            ("tuning", self.tuning.is_some(), defaults.tuning.is_some()),
            ("convergence", self.convergence.is_some(), defaults.convergence.is_some()),
            ("mixture", self.mixture.is_some(), defaults.mixture.is_some()),
            ("scaling", self.scaling.is_some(), defaults.scaling.is_some()),
            ("toy_nn", self.toy_nn.is_some(), defaults.toy_nn.is_some()),
            ("oracle", self.oracle.is_some(), defaults.oracle.is_some()),
        ];
        for (name, present, expected) in sections {
            if present && !expected {
                return Err(Error::config(format!(
                    "section `{name}` does not apply to experiment {}",
                    self.experiment.as_str()
                )));
            }
            if !present && expected {
                return Err(Error::config(format!(
                    "experiment {} needs a `{name}` section",
                    self.experiment.as_str()
                )));
            }
        }
        if let Some(model) = &self.model {
            model.validate()?;
        }
        if let Some(t) = &self.tuning {
            t.validate()?;
        }
        if let Some(p) = &self.proposal {
            p.validate()?;
        }
        let n = match &self.data {
            Some(DataSpec::File { path }) if !path.is_file() => {
                return Err(Error::config(format!("data file {} does not exist", path.display())));
            }
            Some(d) => Some(d.n()?),
            None => None,
        };
        if let (Some(n), Some(t)) = (n, &self.temper) {
            t.spec(n)?;
        }
        if let (Some(n), Some(Proposal::Sgld(c) | Proposal::Rsgld(c))) = (n, &self.proposal) {
            if c.n != n {
                return Err(Error::config(format!("proposal n = {} but the data has n = {n}", c.n)));
            }
        }
        if let (Some(DataSpec::Generated { theta_star, .. }), Some(model)) = (&self.data, &self.model) {
            if !theta_star.is_empty() && theta_star.len() != model.param_dim() {
                return Err(Error::config(format!(
                    "theta_star has {} entries but the model has {} parameters",
                    theta_star.len(),
                    model.param_dim()
                )));
            }
        }
        match self.experiment {
            ExperimentKind::GaussianConvergence => self.validate_convergence(),
            ExperimentKind::MixtureTraveling => self.validate_mixture(),
            ExperimentKind::AcceptanceScaling => self.validate_scaling(),
            ExperimentKind::ToyNn => self.validate_toy_nn(),
            ExperimentKind::TuneDelta => self.validate_tune(),
            ExperimentKind::OracleCheck => self.validate_oracle(),
        }
    }

    fn require_rw(&self) -> Result<()> {
        match self.proposal()? {
            Proposal::RandomWalk(_) => Ok(()),
            p => Err(Error::config(format!(
                "experiment {} uses a random-walk proposal, got {}",
                self.experiment.as_str(),
                p.name()
            ))),
        }
    }

    fn check_start(&self, start: &[f64]) -> Result<()> {
        let dim = self.model()?.param_dim();
        if !start.is_empty() && start.len() != dim {
            return Err(Error::config(format!("start has {} entries, expected {dim}", start.len())));
        }
        if start.is_empty() {
            return Ok(());
        }
        ParamVector::new(start.to_vec()).map(|_| ())
    }

    fn validate_convergence(&self) -> Result<()> {
        let ModelSpec::GaussianMean { dim, .. } = self.model()? else {
            return Err(Error::config("gaussian-convergence needs the gaussian-mean family"));
        };
        if !matches!(dim, 2 | 5) {
            return Err(Error::config(format!("gaussian-convergence supports d in {{2, 5}}, got {dim}")));
        }
        if !matches!(self.data_spec()?, DataSpec::Generated { .. }) {
            return Err(Error::config("gaussian-convergence needs generated data"));
        }
        self.require_rw()?;
        let c = self.convergence()?;
        self.check_start(&c.start)?;
        if c.checkpoints.is_empty() || c.checkpoints[0] == 0 || c.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("checkpoints must be non-empty, positive and strictly increasing"));
        }
        if c.bins < 3 {
            return Err(Error::config("bins must be >= 3"));
        }
        if c.reference_draws == 0 {
            return Err(Error::config("reference_draws must be >= 1"));
        }
        Ok(())
    }

    fn validate_mixture(&self) -> Result<()> {
        if !matches!(self.model()?, ModelSpec::GaussianMixture2 { .. }) {
            return Err(Error::config("mixture-traveling needs the gaussian-mixture-2 family"));
        }
        if !matches!(self.data_spec()?, DataSpec::Generated { .. }) {
            return Err(Error::config("mixture-traveling needs generated data"));
        }
        self.require_rw()?;
        let s = self.mixture()?;
        self.check_start(&s.start)?;
        if !(s.radius_fraction > 0.0 && s.radius_fraction < 0.5) {
            return Err(Error::config("radius_fraction must lie in (0, 0.5) so the mode balls are disjoint"));
        }
        if let Some(c) = s.full_batch_c_n {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("full_batch_c_n must be positive"));
            }
        }
        if self.theta_star()?[1] == 0.0 {
            return Err(Error::config("theta_star[1] = 0 merges the two modes"));
        }
        if self.iterations == 0 || s.full_batch_iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if s.grid_bins < 3 {
            return Err(Error::config("grid_bins must be >= 3"));
        }
        Ok(())
    }

    fn validate_scaling(&self) -> Result<()> {
        let s = self.scaling()?;
        match self.data_spec()? {
            DataSpec::Generated { theta_star, .. } if theta_star.iter().all(|&t| t == 0.0) => {}
            _ => return Err(Error::config("acceptance-scaling needs generated data at theta_star = 0")),
        }
        if s.dims.is_empty() || s.dims.contains(&0) {
            return Err(Error::config("dims must be non-empty and positive"));
        }
        if s.grid_min > s.grid_max || s.points_per_decade == 0 {
            return Err(Error::config("the epsilon grid is empty"));
        }
        if s.betas.is_empty() || s.betas.iter().any(|b| !(b.is_finite() && *b >= 1.0)) {
            return Err(Error::config("betas must be non-empty and >= 1"));
        }
        ModelSpec::GaussianMean {
            dim: 1,
            variance: s.variance,
            form: s.form,
        }
        .validate()?;
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        Ok(())
    }

    fn validate_toy_nn(&self) -> Result<()> {
        let ModelSpec::SoftmaxMlp { input, classes, .. } = self.model()? else {
            return Err(Error::config("toy-nn needs the softmax-mlp family"));
        };
        if !matches!(self.proposal()?, Proposal::Rsgld(_)) {
            return Err(Error::config("toy-nn trains with an rsgld proposal"));
        }
        if let DataSpec::Clusters { test_n, radius, spread, .. } = self.data_spec()? {
            if *input < 2 {
                return Err(Error::config("cluster data needs at least 2 inputs"));
            }
            let limit = radius * (std::f64::consts::PI / *classes as f64).sin();
            if !(*spread > 0.0 && *spread < limit) {
                return Err(Error::config(format!(
                    "spread must lie in (0, {limit}) for the class balls to be disjoint"
                )));
            }
            if *test_n == 0 {
                return Err(Error::config("test_n must be >= 1"));
            }
        }
        let s = self.toy_nn()?;
        if s.epochs == 0 || s.probe_steps == 0 {
            return Err(Error::config("epochs and probe_steps must be >= 1"));
        }
        if !(s.init_sd.is_finite() && s.init_sd >= 0.0) {
            return Err(Error::config("init_sd must be non-negative"));
        }
        Ok(())
    }

    fn validate_tune(&self) -> Result<()> {
        if matches!(self.data_spec()?, DataSpec::Clusters { .. }) {
            return Err(Error::config("tune-delta needs generated or file data"));
        }
        self.require_rw()
    }

    fn validate_oracle(&self) -> Result<()> {
        let o = self.oracle()?;
        if o.ns.is_empty() || o.ns.iter().any(|&n| !(2..=6).contains(&n)) {
            return Err(Error::config("oracle ns must lie in 2..=6"));
        }
        if o.grid_sizes.is_empty() || o.grid_sizes.iter().any(|&k| k < 2) {
            return Err(Error::config("oracle grid sizes must be >= 2"));
        }
        if !(o.half_width > 0.0 && o.tolerance > 0.0 && o.balance_tolerance > 0.0) {
            return Err(Error::config("oracle widths and tolerances must be positive"));
        }
        Ok(())
    }
}

/// Recursive table merge; a user table that switches an enum tag replaces
/// the default table instead of merging into it.
fn merge(mut base: toml::Table, user: toml::Table) -> toml::Table {
    for (key, value) in user {
        let merged = match (base.remove(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if same_tag(&b, &u) => toml::Value::Table(merge(b, u)),
            (_, v) => v,
        };
        base.insert(key, merged);
    }
    base
}

fn same_tag(base: &toml::Table, user: &toml::Table) -> bool {
    ["family", "kind", "source"]
        .iter()
        .all(|tag| match (base.get(*tag), user.get(*tag)) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        })
}
