use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use super::{roles, Artifact, DataSpec, ExperimentConfig, RunOutput, SeedRange};
use crate::batch::BatchSampler;
use crate::diagnostics::BetaSchedule;
use crate::error::{Error, Result};
use crate::model::{fmt_f64, Dataset, ModelSpec, ParamVector};
use crate::proposals::{Direction, Proposal, RsgldConfig};
use crate::rng::{self, derive_seed};
use crate::sampler::{sgd_update, sgld_update, AcceptCounts, Chain};

/// Draws `(train, test)` for a `DataSpec::Clusters` config. Class `k` is
/// uniform on the ball of radius `spread` around `radius·(cos 2πk/K,
/// sin 2πk/K, 0, …)`.
pub fn cluster_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let DataSpec::Clusters {
        n,
        test_n,
        radius,
        spread,
        seed,
    } = *cfg.data_spec()?
    else {
        return Err(Error::config("cluster data needs a `clusters` data source"));
    };
    let ModelSpec::SoftmaxMlp { input, classes, .. } = *cfg.model()? else {
        return Err(Error::config("cluster data needs the softmax-mlp family"));
    };
    let draw = |count: usize, stream: u64| -> Result<Dataset> {
        let mut rng = rng::stream(seed, stream);
        let mut values = Vec::with_capacity(count * input);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let k = rng.random_range(0..classes);
            let angle = std::f64::consts::TAU * k as f64 / classes as f64;
            let dir: Vec<f64> = (0..input).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = spread * rng.random::<f64>().powf(1.0 / input as f64);
            for (j, v) in dir.iter().enumerate() {
                let centre = match j {
                    0 => radius * angle.cos(),
                    1 => radius * angle.sin(),
                    _ => 0.0,
                };
                values.push(centre + r * v / norm);
            }
            labels.push(k as u32);
        }
        Dataset::new(input, values, Some(labels))
    };
    Ok((draw(n, rng::DATA_STREAM)?, draw(test_n, rng::REFERENCE_STREAM)?))
}

/// Fraction of records whose arg-max class differs from the label.
pub fn classification_error(model: &ModelSpec, theta: &[f64], data: &Dataset) -> Result<f64> {
    let layout = model.mlp_layout();
    let mut scratch = layout.scratch();
    let labels = data.labels().ok_or_else(|| Error::contract("classification needs labels"))?;
    let wrong = (0..data.len())
        .filter(|&i| layout.predict(theta, data.row(i), &mut scratch) != labels[i] as usize)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochRow {
    pub method: &'static str,
    pub epoch: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub accept_rate: Option<f64>,
    pub forward_rate: Option<f64>,
    pub backward_rate: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToyNnReport {
    pub epsilon: f64,
    pub rows: Vec<EpochRow>,
    /// RSGLD acceptance over the whole run.
    pub rsgld_counts: AcceptCounts,
    /// β after each epoch's update.
    pub betas: Vec<f64>,
    #[serde(skip)]
    pub seeds: Vec<SeedRange>,
}

impl ToyNnReport {
    pub fn method_rows(&self, method: &str) -> Vec<&EpochRow> {
        self.rows.iter().filter(|r| r.method == method).collect()
    }

    /// First epoch at which `method`'s training error is at most `level`.
    pub fn first_epoch_below(&self, method: &str, level: f64) -> Option<usize> {
        self.method_rows(method)
            .into_iter()
            .find(|r| r.train_error <= level)
            .map(|r| r.epoch)
    }

    pub fn final_beta(&self) -> Option<f64> {
        self.betas.last().copied()
    }

    pub fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "method",
            "epoch",
            "train_error",
            "test_error",
            "accept_rate",
            "forward_rate",
            "backward_rate",
            "beta",
        ])?;
        let opt = |v: Option<f64>| v.filter(|x| !x.is_nan()).map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.method.to_string(),
                r.epoch.to_string(),
                fmt_f64(r.train_error),
                fmt_f64(r.test_error),
                opt(r.accept_rate),
                opt(r.forward_rate),
                opt(r.backward_rate),
                opt(r.beta),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn into_output(self) -> Result<RunOutput> {
        let finals: Vec<&EpochRow> = ["rsgld", "sgd", "sgld"]
            .iter()
            .filter_map(|m| self.method_rows(m).last().copied())
            .collect();
        Ok(RunOutput {
            artifacts: vec![Artifact::new("training.csv", self.csv()?)],
            summary: json!({
                "epsilon": self.epsilon,
                "final": finals,
                "final_beta": self.final_beta(),
                "first_epoch_below_5pct": self.first_epoch_below("rsgld", 0.05),
                "rsgld_forward_rate": self.rsgld_counts.direction_rate(Direction::Forward),
                "rsgld_backward_rate": self.rsgld_counts.direction_rate(Direction::Backward),
            }),
            seeds: self.seeds,
            substitutions: vec!["toy MLP on separable synthetic clusters instead of the MNIST and CIFAR-10 networks".into()],
            failure: None,
        })
    }
}

/// Trains with RSGLD under the adaptive β schedule and, optionally, with
/// plain SGD and SGLD at the same ε from the same initial weights.
pub fn toy_nn(cfg: &ExperimentConfig) -> Result<ToyNnReport> {
    cfg.validate()?;
    let model = cfg.model()?;
    let section = cfg.toy_nn()?;
    let (train, test) = cluster_data(cfg)?;
    let n = train.len();
    let spec = cfg.temper()?.spec(n)?;
    let Proposal::Rsgld(rs) = *cfg.proposal()? else {
        unreachable!("validate() requires rsgld");
    };
    let epoch_len = spec.epoch_len() as u64;

    let init_root = derive_seed(cfg.seed, roles::INIT);
    let mut init_rng = rng::stream(init_root, 0);
    let theta0 = ParamVector::new(
        (0..model.param_dim())
            .map(|_| section.init_sd * init_rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )?;
    let errors = |theta: &[f64]| -> Result<(f64, f64)> {
        Ok((classification_error(model, theta, &train)?, classification_error(model, theta, &test)?))
    };

    let mut rows = Vec::new();
    let (tr, te) = errors(&theta0)?;
    let mcmc_root = derive_seed(cfg.seed, roles::MHBT);
    let mut chain = Chain::new(model, &train, Proposal::Rsgld(rs), spec, theta0.clone(), mcmc_root, 0)?;
    let mut schedule = BetaSchedule::new(rs.beta)?;
    schedule.probe_steps = section.probe_steps;
    rows.push(EpochRow {
        method: "rsgld",
        epoch: 0,
        train_error: tr,
        test_error: te,
        accept_rate: None,
        forward_rate: None,
        backward_rate: None,
        beta: Some(schedule.beta()),
    });
    let mut betas = Vec::with_capacity(section.epochs);
    for epoch in 1..=section.epochs {
        let before = *chain.counts();
        chain.advance(epoch_len)?;
        let mut counts = *chain.counts();
        for i in 0..3 {
            counts.proposed[i] -= before.proposed[i];
            counts.accepted[i] -= before.accepted[i];
        }
        let rate = counts.rate();
        let probe_steps = section.probe_steps;
        schedule.update(rate, |beta| {
            chain.set_proposal(Proposal::Rsgld(RsgldConfig::new(rs.epsilon, beta, n)?))?;
            chain.probe_forward(probe_steps)
        })?;
        chain.set_proposal(Proposal::Rsgld(RsgldConfig::new(rs.epsilon, schedule.beta(), n)?))?;
        betas.push(schedule.beta());
        let (tr, te) = errors(chain.state().theta())?;
        rows.push(EpochRow {
            method: "rsgld",
            epoch,
            train_error: tr,
            test_error: te,
            accept_rate: Some(rate),
            forward_rate: Some(counts.direction_rate(Direction::Forward)),
            backward_rate: Some(counts.direction_rate(Direction::Backward)),
            beta: Some(schedule.beta()),
        });
        log::debug!("rsgld epoch {epoch}: train {tr:.4} accept {rate:.3} beta {:.4}", schedule.beta());
    }

    let mut seeds = vec![SeedRange::new("init", init_root, 1), SeedRange::new("rsgld", mcmc_root, 1)];
    if section.baselines {
        let sgld_cfg = RsgldConfig::new(rs.epsilon, 1.0, n)?;
        for (method, role) in [("sgd", roles::SGD), ("sgld", roles::SGLD)] {
            let root = derive_seed(cfg.seed, role);
            seeds.push(SeedRange::new(method, root, 1));
            let mut rng = rng::stream(root, 0);
            let mut sampler = BatchSampler::new(n, spec.m)?;
            let mut theta = theta0.clone();
            rows.push(EpochRow {
                method,
                epoch: 0,
                train_error: tr,
                test_error: te,
                accept_rate: None,
                forward_rate: None,
                backward_rate: None,
                beta: None,
            });
            for epoch in 1..=section.epochs {
                for _ in 0..epoch_len {
                    theta = match method {
                        "sgd" => sgd_update(&theta, rs.epsilon, model, &train, &mut sampler, &mut rng)?,
                        _ => sgld_update(&theta, &sgld_cfg, model, &train, &mut sampler, &mut rng)?,
                    };
                }
                let (tr, te) = errors(&theta)?;
                rows.push(EpochRow {
                    method,
                    epoch,
                    train_error: tr,
                    test_error: te,
                    accept_rate: None,
                    forward_rate: None,
                    backward_rate: None,
                    beta: None,
                });
            }
        }
    }
    Ok(ToyNnReport {
        epsilon: rs.epsilon,
        rows,
        rsgld_counts: *chain.counts(),
        betas,
        seeds,
    })
}
