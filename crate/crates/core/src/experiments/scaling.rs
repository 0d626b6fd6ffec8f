use serde::Serialize;
use serde_json::json;

use super::{roles, Artifact, ExperimentConfig, RunOutput, SeedRange};
use crate::error::Result;
use crate::model::{fmt_f64, ModelSpec, ParamVector};
use crate::par::{try_map_indexed, Execution};
use crate::proposals::{Direction, Proposal, RsgldConfig};
use crate::rng::derive_seed;
use crate::sampler::{AcceptCounts, Chain};

/// Mean acceptance of one (d, proposal, ε) cell.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingCell {
    pub d: usize,
    /// `sgld` or `rsgld`.
    pub proposal: &'static str,
    /// β for RSGLD; `None` for SGLD.
    pub beta: Option<f64>,
    pub grid_index: i32,
    pub epsilon: f64,
    /// Mean `min(1, r)` over all steps of all chains.
    pub mean_accept: f64,
    pub counts: AcceptCounts,
}

impl ScalingCell {
    pub fn label(&self) -> String {
        match self.beta {
            Some(b) => format!("rsgld(beta={b})"),
            None => "sgld".into(),
        }
    }
}

/// Largest ε on the grid reaching a threshold, per (d, proposal).
#[derive(Clone, Debug, Serialize)]
pub struct LargestEpsilon {
    pub d: usize,
    pub proposal: String,
    pub at_half: Option<f64>,
    pub at_tenth: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub cells: Vec<ScalingCell>,
    pub largest: Vec<LargestEpsilon>,
    #[serde(skip)]
    pub seeds: Vec<SeedRange>,
}

impl ScalingReport {
    /// Cells of one (d, proposal label) in grid order.
    pub fn series(&self, d: usize, label: &str) -> Vec<&ScalingCell> {
        self.cells.iter().filter(|c| c.d == d && c.label() == label).collect()
    }

    pub fn largest_epsilon(&self, d: usize, label: &str, threshold: f64) -> Option<f64> {
        self.series(d, label)
            .into_iter()
            .filter(|c| c.mean_accept >= threshold)
            .map(|c| c.epsilon)
            .fold(None, |m: Option<f64>, e| Some(m.map_or(e, |m| m.max(e))))
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            let l = c.label();
            if !out.contains(&l) {
                out.push(l);
            }
        }
        out
    }

    pub fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "d",
            "proposal",
            "beta",
            "grid_index",
            "epsilon",
            "mean_accept",
            "accept_rate",
            "forward_rate",
            "backward_rate",
        ])?;
        let rate = |v: f64| if v.is_nan() { String::new() } else { fmt_f64(v) };
        for c in &self.cells {
            w.write_record([
                c.d.to_string(),
                c.proposal.to_string(),
                c.beta.map(fmt_f64).unwrap_or_default(),
                c.grid_index.to_string(),
                fmt_f64(c.epsilon),
                fmt_f64(c.mean_accept),
                rate(c.counts.rate()),
                rate(c.counts.direction_rate(Direction::Forward)),
                rate(c.counts.direction_rate(Direction::Backward)),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn into_output(self) -> Result<RunOutput> {
        Ok(RunOutput {
            artifacts: vec![Artifact::new("acceptance.csv", self.csv()?)],
            summary: json!({ "largest_epsilon": &self.largest }),
            seeds: self.seeds,
            substitutions: Vec::new(),
            failure: None,
        })
    }
}

/// For every d, ε on the grid and proposal in {SGLD, RSGLD(β) for each β},
/// averages the acceptance probability over the first `iterations` steps
/// from the origin. Every cell replays the same chain streams.
pub fn acceptance_scaling(cfg: &ExperimentConfig, exec: Execution) -> Result<ScalingReport> {
    cfg.validate()?;
    let section = cfg.scaling()?;
    let n = cfg.data_spec()?.n()?;
    let data_seed = match cfg.data_spec()? {
        super::DataSpec::Generated { seed, .. } => *seed,
        _ => unreachable!("validate() requires generated data"),
    };
    let spec = cfg.temper()?.spec(n)?;
    let root = derive_seed(cfg.seed, roles::MHBT);
    let mut kinds: Vec<Option<f64>> = vec![None];
    kinds.extend(section.betas.iter().map(|&b| Some(b)));

    let mut cells = Vec::new();
    for &d in &section.dims {
        let model = ModelSpec::GaussianMean {
            dim: d,
            variance: section.variance,
            form: section.form,
        };
        let data = model.generate_data(&vec![0.0; d], n, data_seed)?;
        let grid: Vec<(i32, f64)> = (section.grid_min..=section.grid_max).zip(section.epsilons(d, n)).collect();
        let jobs: Vec<(i32, f64, Option<f64>)> = grid
            .iter()
            .flat_map(|&(j, eps)| kinds.iter().map(move |&b| (j, eps, b)))
            .collect();
        let done = try_map_indexed(exec, jobs.len(), |i| {
            let (grid_index, epsilon, beta) = jobs[i];
            let proposal = match beta {
                None => Proposal::Sgld(RsgldConfig::new(epsilon, 1.0, n)?),
                Some(b) => Proposal::Rsgld(RsgldConfig::new(epsilon, b, n)?),
            };
            let mut total = 0.0;
            let mut counts = AcceptCounts::default();
            for c in 0..cfg.chains {
                let mut chain = Chain::new(&model, &data, proposal, spec, ParamVector::zeros(d), root, c as u64)?;
                for _ in 0..cfg.iterations {
                    total += chain.step()?.log_accept_ratio.min(0.0).exp();
                }
                counts.merge(chain.counts());
            }
            Ok::<_, crate::error::Error>(ScalingCell {
                d,
                proposal: proposal.name(),
                beta,
                grid_index,
                epsilon,
                mean_accept: total / (cfg.chains as u64 * cfg.iterations) as f64,
                counts,
            })
        })?;
        cells.extend(done);
    }
    let mut report = ScalingReport {
        cells,
        largest: Vec::new(),
        seeds: vec![SeedRange::new("scaling", root, cfg.chains as u64)],
    };
    for &d in &section.dims {
        for label in report.labels() {
            report.largest.push(LargestEpsilon {
                d,
                at_half: report.largest_epsilon(d, &label, 0.5),
                at_tenth: report.largest_epsilon(d, &label, 0.1),
                proposal: label,
            });
        }
    }
    Ok(report)
}
