//! Exact MHBT transition matrices over `(grid state, batch)` pairs.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use rand::Rng;

use super::{normalize_logs, Subsets};
use crate::batch::{BatchIndex, BatchSampler};
use crate::error::{Error, Result};
use crate::math::binomial;
use crate::model::{fmt_f64, Dataset, ModelSpec, ParamVector};
use crate::rng;
use crate::sampler::{accept, log_accept_ratio, ChainState, TemperSpec};

const MAX_BATCHES: u128 = 100;
const MAX_STATES: usize = 10_000;
const RESIDUAL: f64 = 1e-13;
const MAX_SWEEPS: usize = 5_000_000;

/// A chain restricted to a finite θ grid with a row-stochastic proposal.
#[derive(Clone, Debug)]
pub struct DiscreteChainSpec {
    pub theta_grid: Vec<ParamVector>,
    pub proposal_matrix: Vec<Vec<f64>>,
    pub data: Dataset,
    pub spec: TemperSpec,
}

impl DiscreteChainSpec {
    /// Nearest-neighbour proposal on an ordered grid: ½ left, ½ right, with
    /// the missing neighbour's mass kept at the endpoints.
    pub fn nearest_neighbour(theta_grid: Vec<ParamVector>, data: Dataset, spec: TemperSpec) -> Self {
        let k = theta_grid.len();
        let mut q = vec![vec![0.0; k]; k];
        for (i, row) in q.iter_mut().enumerate() {
            if k == 1 {
                row[0] = 1.0;
                continue;
            }
            if i > 0 {
                row[i - 1] = 0.5;
            } else {
                row[i] += 0.5;
            }
            if i + 1 < k {
                row[i + 1] = 0.5;
            } else {
                row[i] += 0.5;
            }
        }
        DiscreteChainSpec {
            theta_grid,
            proposal_matrix: q,
            data,
            spec,
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<Vec<Vec<usize>>> {
        self.spec.validate()?;
        model.check_dataset(&self.data)?;
        let k = self.theta_grid.len();
        if k == 0 {
            return Err(Error::contract("theta grid is empty"));
        }
        if self.spec.n != self.data.len() {
            return Err(Error::contract("spec n does not match the dataset"));
        }
        if binomial(self.spec.n, self.spec.m) > MAX_BATCHES {
            return Err(Error::contract(format!(
                "C({}, {}) exceeds {MAX_BATCHES} batches",
                self.spec.n, self.spec.m
            )));
        }
        if self.proposal_matrix.len() != k || self.proposal_matrix.iter().any(|r| r.len() != k) {
            return Err(Error::contract("proposal matrix must be square over the grid"));
        }
        for (i, row) in self.proposal_matrix.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::contract(format!("proposal row {i} is not a probability vector")));
            }
        }
        let batches: Vec<Vec<usize>> = Subsets::new(self.spec.n, self.spec.m).collect();
        if k * batches.len() > MAX_STATES {
            return Err(Error::contract(format!("more than {MAX_STATES} augmented states")));
        }
        let unreachable = self.unreachable();
        if !unreachable.is_empty() {
            return Err(Error::Unreachable { unreachable });
        }
        Ok(batches)
    }

    /// Grid states that are not mutually reachable with state 0 under the
    /// proposal graph.
    fn unreachable(&self) -> Vec<usize> {
        let k = self.theta_grid.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; k];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for (j, flag) in seen.iter_mut().enumerate() {
                    let p = if forward {
                        self.proposal_matrix[i][j]
                    } else {
                        self.proposal_matrix[j][i]
                    };
                    if p > 0.0 && !*flag {
                        *flag = true;
                        queue.push_back(j);
                    }
                }
            }
            seen
        };
        let (fwd, bwd) = (reach(true), reach(false));
        (0..k).filter(|&i| !(fwd[i] && bwd[i])).collect()
    }
}

/// Power-iterated and analytic stationary distributions over augmented
/// states, indexed `grid_index * batches + batch_index`.
#[derive(Clone, Debug)]
pub struct StationaryResult {
    pub theta_grid: Vec<ParamVector>,
    /// Sorted batches in colex order.
    pub batches: Vec<Vec<usize>>,
    pub power: Vec<f64>,
    pub analytic: Vec<f64>,
    pub residual: f64,
    pub sweeps: usize,
    /// Sparse transition rows `(target, probability)`.
    pub transitions: Vec<Vec<(usize, f64)>>,
}

impl StationaryResult {
    pub fn state_count(&self) -> usize {
        self.power.len()
    }

    pub fn max_abs_error(&self) -> f64 {
        self.power
            .iter()
            .zip(&self.analytic)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn marginal(&self, v: &[f64]) -> Vec<f64> {
        v.chunks(self.batches.len()).map(|c| c.iter().sum()).collect()
    }

    pub fn theta_marginal(&self) -> Vec<f64> {
        self.marginal(&self.power)
    }

    pub fn analytic_theta_marginal(&self) -> Vec<f64> {
        self.marginal(&self.analytic)
    }

    fn probability(&self, from: usize, to: usize) -> f64 {
        self.transitions[from]
            .iter()
            .find(|(j, _)| *j == to)
            .map_or(0.0, |(_, p)| *p)
    }

    /// `max |π̃(s) P(s,s′) − π̃(s′) P(s′,s)|` against the analytic vector.
    pub fn detailed_balance_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (s, row) in self.transitions.iter().enumerate() {
            for &(t, p) in row {
                let flow = self.analytic[s] * p - self.analytic[t] * self.probability(t, s);
                worst = worst.max(flow.abs());
            }
        }
        worst
    }

    /// CSV `state_index,theta_0..,batch_id,probability` of the power vector.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.theta_grid[0].dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["state_index".to_string()];
        header.extend((0..d).map(|j| format!("theta_{j}")));
        header.extend(["batch_id".to_string(), "probability".to_string()]);
        w.write_record(&header)?;
        let b = self.batches.len();
        for (s, p) in self.power.iter().enumerate() {
            let mut row = vec![s.to_string()];
            row.extend(self.theta_grid[s / b].iter().map(|&v| fmt_f64(v)));
            row.push((s % b).to_string());
            row.push(fmt_f64(*p));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn scored_states(
    chain: &DiscreteChainSpec,
    batches: &[Vec<usize>],
    model: &ModelSpec,
) -> Result<Vec<ChainState>> {
    let mut states = Vec::with_capacity(chain.theta_grid.len() * batches.len());
    for theta in &chain.theta_grid {
        for b in batches {
            let batch = BatchIndex::from_indices(chain.spec.n, b.clone())?;
            states.push(ChainState::new(theta.clone(), batch, false, &chain.spec, model, &chain.data)?);
        }
    }
    Ok(states)
}

/// Builds the MHBT kernel over `(grid state, batch)` pairs using the
/// sampler's own acceptance ratio, then power-iterates it to stationarity.
pub fn exact_stationary(chain: &DiscreteChainSpec, model: &ModelSpec) -> Result<StationaryResult> {
    let batches = chain.validate(model)?;
    let nb = batches.len();
    let states = scored_states(chain, &batches, model)?;
    let ns = states.len();
    let q = &chain.proposal_matrix;
    let mut transitions = Vec::with_capacity(ns);
    for (s, current) in states.iter().enumerate() {
        let g = s / nb;
        let mut row = Vec::new();
        let mut moved = 0.0;
        for (h, &q_gh) in q[g].iter().enumerate() {
            if q_gh == 0.0 {
                continue;
            }
            for c in 0..nb {
                let t = h * nb + c;
                if t == s {
                    continue;
                }
                let q_hg = q[h][g];
                let alpha = if q_hg == 0.0 {
                    0.0
                } else {
                    let target = &states[t];
                    let log_r = log_accept_ratio(
                        current,
                        target.theta(),
                        target.batch(),
                        q_gh.ln(),
                        q_hg.ln(),
                        &chain.spec,
                        model,
                        &chain.data,
                    )?;
                    log_r.min(0.0).exp()
                };
                let p = q_gh / nb as f64 * alpha;
                if p > 0.0 {
                    row.push((t, p));
                    moved += p;
                }
            }
        }
        row.push((s, 1.0 - moved));
        transitions.push(row);
    }

    let analytic = normalize_logs(&states.iter().map(|s| s.cached_score()).collect::<Vec<_>>());

    // lazy chain ½(I + P) shares the stationary vector and cannot be periodic
    let mut v = vec![1.0 / ns as f64; ns];
    let mut next = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, row) in transitions.iter().enumerate() {
            for &(t, p) in row {
                next[t] += v[s] * p;
            }
        }
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let total: f64 = v.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).sum();
        for (a, b) in v.iter_mut().zip(&next) {
            *a = 0.5 * (*a + b) / total;
        }
        sweeps += 1;
        if residual < RESIDUAL {
            break;
        }
    }
    if residual >= RESIDUAL {
        log::warn!("power iteration stopped at residual {residual:e} after {sweeps} sweeps");
    }
    Ok(StationaryResult {
        theta_grid: chain.theta_grid.clone(),
        batches,
        power: v,
        analytic,
        residual,
        sweeps,
        transitions,
    })
}

/// Runs the discretised MHBT chain for `steps` steps from grid state 0 and
/// returns the empirical occupancy of each augmented state.
pub fn simulate_discrete(chain: &DiscreteChainSpec, model: &ModelSpec, steps: usize, seed: u64) -> Result<Vec<f64>> {
    let batches = chain.validate(model)?;
    let nb = batches.len();
    let lookup: HashMap<Vec<usize>, usize> = batches.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
    let states = scored_states(chain, &batches, model)?;
    let mut rng = rng::stream(seed, 0);
    let mut sampler = BatchSampler::new(chain.spec.n, chain.spec.m)?;
    let first = lookup[&sampler.draw(&mut rng).sorted()];
    let mut s = first;
    let mut counts = vec![0u64; states.len()];
    let q = &chain.proposal_matrix;
    for _ in 0..steps {
        let g = s / nb;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut h = q[g].len() - 1;
        for (j, p) in q[g].iter().enumerate() {
            acc += p;
            if u < acc {
                h = j;
                break;
            }
        }
        let c = lookup[&sampler.draw(&mut rng).sorted()];
        let t = h * nb + c;
        let u: f64 = rng.random();
        if q[h][g] > 0.0 {
            let target = &states[t];
            let log_r = log_accept_ratio(
                &states[s],
                target.theta(),
                target.batch(),
                q[g][h].ln(),
                q[h][g].ln(),
                &chain.spec,
                model,
                &chain.data,
            )?;
            if accept(log_r, u) {
                s = t;
            }
        }
        counts[s] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / steps as f64).collect())
}
