use serde::Serialize;
use serde_json::json;

use super::{Artifact, ExperimentConfig, RunOutput};
use crate::error::Result;
use crate::model::{fmt_f64, ModelSpec, ParamVector};
use crate::oracle::{exact_stationary, DiscreteChainSpec};
use crate::par::{try_map_indexed, Execution};
use crate::rng::derive_seed;
use crate::sampler::TemperSpec;

/// One instance of the tiny exact-stationarity matrix.
#[derive(Clone, Debug, Serialize)]
pub struct OracleInstance {
    pub n: usize,
    pub m: usize,
    pub c_n: f64,
    pub grid_points: usize,
    pub states: usize,
    pub max_abs_error: f64,
    pub detailed_balance_error: f64,
    pub residual: f64,
    pub sweeps: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub instances: Vec<OracleInstance>,
}

impl OracleReport {
    pub fn failures(&self) -> usize {
        self.instances.iter().filter(|i| !i.pass).count()
    }

    pub fn csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "m",
            "c_n",
            "grid_points",
            "states",
            "max_abs_error",
            "detailed_balance_error",
            "residual",
            "sweeps",
            "pass",
        ])?;
        for i in &self.instances {
            w.write_record([
                i.n.to_string(),
                i.m.to_string(),
                fmt_f64(i.c_n),
                i.grid_points.to_string(),
                i.states.to_string(),
                fmt_f64(i.max_abs_error),
                fmt_f64(i.detailed_balance_error),
                fmt_f64(i.residual),
                i.sweeps.to_string(),
                (i.pass as u8).to_string(),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn into_output(self) -> Result<RunOutput> {
        let failed = self.failures();
        Ok(RunOutput {
            artifacts: vec![Artifact::new("oracle.csv", self.csv()?)],
            summary: json!({ "instances": self.instances.len(), "failures": failed }),
            seeds: Vec::new(),
            substitutions: Vec::new(),
            failure: (failed > 0).then(|| format!("{failed} of {} oracle instances failed", self.instances.len())),
        })
    }
}

/// `k` evenly spaced points on `[-w, w]`.
pub fn symmetric_grid(k: usize, w: f64) -> Vec<ParamVector> {
    (0..k)
        .map(|i| ParamVector::filled(1, -w + 2.0 * w * i as f64 / (k - 1) as f64))
        .collect()
}

/// Every `(n, m ∈ {1, 2, n}, c_n ∈ {1, 2, n}, grid size)` combination on
/// gaussian-mean d=1 data with a nearest-neighbour grid proposal.
pub fn oracle_check(cfg: &ExperimentConfig, exec: Execution) -> Result<OracleReport> {
    cfg.validate()?;
    let o = cfg.oracle()?;
    let model = ModelSpec::gaussian_mean(1, 1.0);
    let mut jobs = Vec::new();
    for &n in &o.ns {
        let mut ms = vec![1, 2, n];
        ms.dedup();
        let mut cs = vec![1.0, 2.0, n as f64];
        cs.dedup();
        for &m in &ms {
            for &c in &cs {
                for &k in &o.grid_sizes {
                    jobs.push((n, m, c, k));
                }
            }
        }
    }
    let instances = try_map_indexed(exec, jobs.len(), |i| {
        let (n, m, c_n, k) = jobs[i];
        let data = model.generate_data(&[0.0], n, derive_seed(cfg.seed, n as u64))?;
        let chain = DiscreteChainSpec::nearest_neighbour(symmetric_grid(k, o.half_width), data, TemperSpec::new(n, m, c_n)?);
        let r = exact_stationary(&chain, &model)?;
        let (err, balance) = (r.max_abs_error(), r.detailed_balance_error());
        Ok::<_, crate::error::Error>(OracleInstance {
            n,
            m,
            c_n,
            grid_points: k,
            states: r.state_count(),
            max_abs_error: err,
            detailed_balance_error: balance,
            residual: r.residual,
            sweeps: r.sweeps,
            pass: err <= o.tolerance && balance <= o.balance_tolerance,
        })
    })?;
    Ok(OracleReport { instances })
}
