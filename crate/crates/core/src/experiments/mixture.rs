use serde::Serialize;
use serde_json::json;

use super::{roles, tune_step_size, Artifact, ExperimentConfig, RunOutput, SeedRange, TuneProblem, TuneResult};
use crate::diagnostics::{mode_visits, HistogramGrid, ModeVisits};
use crate::error::Result;
use crate::model::{ModelSpec, ParamVector};
use crate::oracle::mixture_log_posterior;
use crate::par::{try_map_indexed, Execution};
use crate::proposals::{Proposal, RwConfig};
use crate::rng::derive_seed;
use crate::sampler::{run_chain, AcceptCounts, ChainConfig, ChainTrace, TemperSpec};

/// One sampler's side of the comparison.
#[derive(Clone, Debug, Serialize)]
pub struct TravelRun {
    pub c_n: f64,
    pub delta: f64,
    pub tuning: Option<TuneResult>,
    pub iterations: u64,
    pub visits: ModeVisits,
    /// Crossings per 10⁴ iterations.
    pub crossing_rate: f64,
    pub counts: AcceptCounts,
    #[serde(skip)]
    pub trace: ChainTrace,
}

/// Histogram cell `[i, j]` with the most MHBT samples inside one mode ball,
/// next to the cell maximising the tempered log posterior in that ball.
#[derive(Clone, Debug, Serialize)]
pub struct ModeCell {
    pub sample_cell: Option<[usize; 2]>,
    pub posterior_cell: Option<[usize; 2]>,
    /// The two cells are equal or adjacent.
    pub coincide: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixtureReport {
    pub centers: Vec<ParamVector>,
    pub radius: f64,
    pub mhbt: TravelRun,
    pub full_batch: TravelRun,
    pub mode_cells: Vec<ModeCell>,
    #[serde(skip)]
    pub seeds: Vec<SeedRange>,
}

impl MixtureReport {
    /// Whether the union of both chains' snapshots visits every mode ball.
    pub fn pooled_coverage(&self) -> bool {
        (0..self.centers.len()).all(|i| self.mhbt.visits.visits[i] + self.full_batch.visits.visits[i] > 0)
    }
}

/// The two label-swapped modes `(θ₁, θ₂)` and `(θ₁+θ₂, −θ₂)`.
pub fn mode_centers(theta_star: &[f64]) -> Result<Vec<ParamVector>> {
    let (a, b) = (theta_star[0], theta_star[1]);
    Ok(vec![ParamVector::new(vec![a, b])?, ParamVector::new(vec![a + b, -b])?])
}

/// Runs one MHBT chain and one full-batch chain from the same start, each
/// with its own tuned random-walk δ, and counts mode crossings.
pub fn mixture_traveling(cfg: &ExperimentConfig, exec: Execution) -> Result<MixtureReport> {
    cfg.validate()?;
    let model = cfg.model()?;
    let section = cfg.mixture()?;
    let data = cfg.dataset()?;
    let n = data.len();
    let theta_star = cfg.theta_star()?;
    let start = if section.start.is_empty() {
        ParamVector::new(theta_star.clone())?
    } else {
        ParamVector::new(section.start.clone())?
    };
    let spec = cfg.temper()?.spec(n)?;
    let full_spec = TemperSpec::new(n, n, section.full_batch_c_n.unwrap_or(n as f64))?;
    let centers = mode_centers(&theta_star)?;
    let separation = centers[0]
        .iter()
        .zip(centers[1].iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let radius = section.radius_fraction * separation;

    let mhbt_root = derive_seed(cfg.seed, roles::MHBT);
    let full_root = derive_seed(cfg.seed, roles::FULL_BATCH);
    let jobs = [
        (spec, cfg.iterations, mhbt_root),
        (full_spec, section.full_batch_iterations, full_root),
    ];
    let runs = try_map_indexed(exec, 2, |i| {
        let (spec, iterations, root) = jobs[i];
        let (delta, tuning) = match (cfg.tuning()?.enabled, cfg.proposal()?) {
            (true, _) => {
                let problem = TuneProblem {
                    model,
                    data: &data,
                    spec,
                    start: ParamVector::new(theta_star.clone())?,
                    seed: root,
                };
                let t = tune_step_size(&problem, cfg.tuning()?)?;
                (t.delta, Some(t))
            }
            (false, Proposal::RandomWalk(rw)) => (rw.delta, None),
            (false, _) => unreachable!("validate() requires a random walk"),
        };
        let chain = ChainConfig {
            proposal: Proposal::RandomWalk(RwConfig::new(delta)?),
            spec,
            iterations,
            seed: root,
            chain_index: 0,
            thin: cfg.thin,
            record_trace: false,
            initial_theta: start.clone(),
        };
        let trace = run_chain(&chain, model, &data)?;
        let points: Vec<&[f64]> = trace.snapshots.iter().map(|s| s.theta.as_slice()).collect();
        let visits = mode_visits(&points, &centers, radius)?;
        Ok::<_, crate::error::Error>(TravelRun {
            c_n: spec.c_n,
            delta,
            tuning,
            iterations,
            crossing_rate: visits.crossings as f64 * 1e4 / iterations as f64,
            visits,
            counts: trace.counts,
            trace,
        })
    })?;
    let [mhbt, full_batch]: [TravelRun; 2] = runs.try_into().expect("two runs");

    let mode_cells = mode_cells(model, data.values(), &mhbt.trace, &centers, radius, spec, section.grid_bins)?;
    Ok(MixtureReport {
        centers,
        radius,
        mhbt,
        full_batch,
        mode_cells,
        seeds: vec![
            SeedRange::new("mhbt", mhbt_root, 1),
            SeedRange::new("full-batch", full_root, 1),
        ],
    })
}

fn mode_cells(
    model: &ModelSpec,
    xs: &[f64],
    trace: &ChainTrace,
    centers: &[ParamVector],
    radius: f64,
    spec: TemperSpec,
    bins: usize,
) -> Result<Vec<ModeCell>> {
    let ModelSpec::GaussianMixture2 { var_x, var_1, var_2 } = *model else {
        unreachable!("validate() requires the mixture family");
    };
    let points: Vec<&[f64]> = trace.snapshots.iter().map(|s| s.theta.as_slice()).collect();
    // the grid spans every mode ball even if the chain never reached it
    let corners: Vec<Vec<f64>> = centers
        .iter()
        .flat_map(|c| [vec![c[0] - radius, c[1] - radius], vec![c[0] + radius, c[1] + radius]])
        .collect();
    let corners: Vec<&[f64]> = corners.iter().map(Vec::as_slice).collect();
    let grid = HistogramGrid::pooled(&[&points, &corners], bins)?.with_points(&points)?;
    let edges = grid.edges();
    let mid = |e: &[f64], k: usize| 0.5 * (e[k] + e[k + 1]);
    let temperature = spec.temperature();
    centers
        .iter()
        .map(|c| {
            let mut best_sample: Option<([usize; 2], u64)> = None;
            let mut best_post: Option<([usize; 2], f64)> = None;
            for i in 0..bins {
                for j in 0..bins {
                    let theta = [mid(&edges[0], i), mid(&edges[1], j)];
                    let dist = ((theta[0] - c[0]).powi(2) + (theta[1] - c[1]).powi(2)).sqrt();
                    if dist > radius {
                        continue;
                    }
                    let count = grid.counts()[i * bins + j];
                    if count > 0 && best_sample.is_none_or(|(_, b)| count > b) {
                        best_sample = Some(([i, j], count));
                    }
                    let lp = mixture_log_posterior(&theta, xs, var_x, var_1, var_2)? / temperature;
                    if best_post.is_none_or(|(_, b)| lp > b) {
                        best_post = Some(([i, j], lp));
                    }
                }
            }
            let (s, p) = (best_sample.map(|b| b.0), best_post.map(|b| b.0));
            let coincide = match (s, p) {
                (Some(a), Some(b)) => a[0].abs_diff(b[0]) <= 1 && a[1].abs_diff(b[1]) <= 1,
                _ => false,
            };
            Ok(ModeCell {
                sample_cell: s,
                posterior_cell: p,
                coincide,
            })
        })
        .collect()
}

impl MixtureReport {
    pub fn into_output(self) -> Result<RunOutput> {
        let mut mhbt = Vec::new();
        self.mhbt.trace.write_csv(&mut mhbt)?;
        let mut full = Vec::new();
        self.full_batch.trace.write_csv(&mut full)?;
        Ok(RunOutput {
            artifacts: vec![
                Artifact::new("trajectory_mhbt.csv", mhbt),
                Artifact::new("trajectory_full_batch.csv", full),
            ],
            summary: json!({
                "report": &self,
                "pooled_coverage": self.pooled_coverage(),
            }),
            seeds: self.seeds,
            substitutions: Vec::new(),
            failure: None,
        })
    }
}
