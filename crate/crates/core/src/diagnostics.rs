//! Acceptance accounting, the adaptive β controller, histogram TV distance
//! and mode-visit counting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fmt_f64, ParamVector};
use crate::proposals::Direction;
use crate::sampler::{AcceptCounts, StepRecord};

/// Epoch-level controller for the RSGLD backward-noise inflation β.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub trigger_accept: f64,
    pub probe_steps: usize,
    pub decrease_threshold: f64,
    pub decrease_factor: f64,
    pub increase_threshold: f64,
    pub increase_factor: f64,
    pub max_phase_reduction: f64,
    pub current_beta: f64,
    pub phase_start_beta: f64,
}

/// What one call to [`BetaSchedule::update`] did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BetaUpdate {
    pub probes: Vec<f64>,
    pub decreases: usize,
    pub increased: bool,
}

impl BetaSchedule {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(Error::config(format!("beta must be >= 1, got {beta}")));
        }
        Ok(BetaSchedule {
            trigger_accept: 0.4,
            probe_steps: 100,
            decrease_threshold: 0.7,
            decrease_factor: 0.95,
            increase_threshold: 0.2,
            increase_factor: 1.05,
            max_phase_reduction: 0.5,
            current_beta: beta,
            phase_start_beta: beta,
        })
    }

    pub fn beta(&self) -> f64 {
        self.current_beta
    }

    /// Applies one end-of-epoch update. `probe(β)` returns the mean forward
    /// acceptance probability at β and must not advance the chain.
    ///
    /// Above the trigger rate an adjustment phase starts: while the probe
    /// exceeds the threshold, β shrinks by the decrease factor, never below
    /// `max_phase_reduction · β_phase_start`. Below the increase threshold β
    /// grows by the increase factor. β never drops below 1.
    pub fn update<F>(&mut self, epoch_accept_rate: f64, mut probe: F) -> Result<BetaUpdate>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if !(0.0..=1.0).contains(&epoch_accept_rate) {
            return Err(Error::contract(format!("epoch acceptance rate {epoch_accept_rate} outside [0, 1]")));
        }
        let mut out = BetaUpdate::default();
        if epoch_accept_rate > self.trigger_accept {
            self.phase_start_beta = self.current_beta;
            let floor = (self.max_phase_reduction * self.phase_start_beta).max(1.0);
            loop {
                let p = probe(self.current_beta)?;
                out.probes.push(p);
                if p <= self.decrease_threshold {
                    break;
                }
                let next = (self.current_beta * self.decrease_factor).max(floor);
                if next >= self.current_beta {
                    break;
                }
                self.current_beta = next;
                out.decreases += 1;
            }
        }
        if epoch_accept_rate < self.increase_threshold {
            self.current_beta *= self.increase_factor;
            out.increased = true;
        }
        self.current_beta = self.current_beta.max(1.0);
        Ok(out)
    }
}

/// Acceptance over one non-overlapping window of steps.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceWindow {
    pub start: usize,
    pub len: usize,
    pub counts: AcceptCounts,
    pub beta: Option<f64>,
}

impl AcceptanceWindow {
    pub fn accept_rate(&self) -> f64 {
        self.counts.rate()
    }

    pub fn forward_rate(&self) -> f64 {
        self.counts.direction_rate(Direction::Forward)
    }

    pub fn backward_rate(&self) -> f64 {
        self.counts.direction_rate(Direction::Backward)
    }
}

/// Splits `records` into windows of `window` steps; the last may be shorter.
pub fn acceptance_summary(records: &[StepRecord], window: usize) -> Result<Vec<AcceptanceWindow>> {
    if window == 0 {
        return Err(Error::contract("window must be >= 1"));
    }
    Ok(records
        .chunks(window)
        .enumerate()
        .map(|(i, chunk)| {
            let mut counts = AcceptCounts::default();
            for r in chunk {
                counts.record(r.direction, r.accepted);
            }
            AcceptanceWindow {
                start: i * window,
                len: chunk.len(),
                counts,
                beta: None,
            }
        })
        .collect())
}

fn rate_field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        fmt_f64(v)
    }
}

/// CSV `window_start,accept_rate,forward_rate,backward_rate,beta`; empty
/// fields where a rate is undefined.
pub fn write_acceptance_csv<W: Write>(writer: W, windows: &[AcceptanceWindow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_start", "accept_rate", "forward_rate", "backward_rate", "beta"])?;
    for win in windows {
        w.write_record([
            win.start.to_string(),
            rate_field(win.accept_rate()),
            rate_field(win.forward_rate()),
            rate_field(win.backward_rate()),
            win.beta.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `iteration,tv`.
pub fn write_tv_csv<W: Write>(writer: W, series: &[(u64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "tv"])?;
    for (it, tv) in series {
        w.write_record([it.to_string(), fmt_f64(*tv)])?;
    }
    w.flush()?;
    Ok(())
}

/// A d-dimensional histogram on per-dimension equal-width bins.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramGrid {
    edges: Vec<Vec<f64>>,
    counts: Vec<u64>,
    total: u64,
}

impl HistogramGrid {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::contract("histogram needs at least one dimension"));
        }
        let mut cells = 1usize;
        for e in &edges {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::contract("bin edges must be strictly increasing with at least one bin"));
            }
            cells = cells
                .checked_mul(e.len() - 1)
                .filter(|&c| c <= 50_000_000)
                .ok_or_else(|| Error::contract("histogram has too many cells"))?;
        }
        Ok(HistogramGrid {
            edges,
            counts: vec![0; cells],
            total: 0,
        })
    }

    /// `bins` equal-width bins per dimension spanning the pooled range of
    /// all sample sets, padded by one bin on each side.
    pub fn pooled<P: AsRef<[f64]>>(sets: &[&[P]], bins: usize) -> Result<Self> {
        if bins < 3 {
            return Err(Error::contract("pooled grids need at least 3 bins per dimension"));
        }
        let d = sets
            .iter()
            .flat_map(|s| s.iter())
            .map(|p| p.as_ref().len())
            .next()
            .ok_or_else(|| Error::contract("no samples to pool"))?;
        let mut edges = Vec::with_capacity(d);
        for j in 0..d {
            let (lo, hi) = sets
                .iter()
                .flat_map(|s| s.iter())
                .map(|p| p.as_ref()[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let width = if hi > lo { (hi - lo) / (bins - 2) as f64 } else { 1.0 };
            let start = lo - width;
            edges.push((0..=bins).map(|k| start + k as f64 * width).collect());
        }
        Self::new(edges)
    }

    pub fn with_points<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<Self> {
        let mut h = HistogramGrid {
            edges: self.edges.clone(),
            counts: vec![0; self.counts.len()],
            total: 0,
        };
        for p in points {
            h.add(p.as_ref())?;
        }
        Ok(h)
    }

    /// Adds a point; coordinates outside the grid land in the edge bins.
    pub fn add(&mut self, point: &[f64]) -> Result<()> {
        if point.len() != self.edges.len() {
            return Err(Error::Dimension {
                what: "histogram point",
                expected: self.edges.len(),
                actual: point.len(),
            });
        }
        let mut cell = 0;
        for (e, &v) in self.edges.iter().zip(point) {
            let bins = e.len() - 1;
            let k = e.partition_point(|&edge| edge <= v).saturating_sub(1).min(bins - 1);
            cell = cell * bins + k;
        }
        self.counts[cell] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Cell frequencies; all zero for an empty histogram.
    pub fn relative(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

/// `½ Σ |a − b|` over relative cell frequencies of two histograms on one grid.
pub fn tv_distance(a: &HistogramGrid, b: &HistogramGrid) -> Result<f64> {
    if a.edges != b.edges {
        return Err(Error::contract("histograms are on different grids"));
    }
    Ok(0.5 * a.relative().iter().zip(b.relative()).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// TV distance between two sample sets on their pooled grid.
pub fn tv_between<P: AsRef<[f64]>>(a: &[P], b: &[P], bins: usize) -> Result<f64> {
    let grid = HistogramGrid::pooled(&[a, b], bins)?;
    tv_distance(&grid.with_points(a)?, &grid.with_points(b)?)
}

/// Per-mode visit counts and the number of mode switches along a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModeVisits {
    pub visits: Vec<u64>,
    pub unassigned: u64,
    pub crossings: u64,
}

/// Assigns each snapshot to the nearest center within `radius` and counts
/// consecutive assigned snapshots that sit in different modes.
pub fn mode_visits<P: AsRef<[f64]>>(trace: &[P], centers: &[ParamVector], radius: f64) -> Result<ModeVisits> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::config(format!("mode radius must be positive, got {radius}")));
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            if dist(a, b) <= 2.0 * radius {
                return Err(Error::config(format!(
                    "mode balls of radius {radius} overlap (centers {:?} and {:?})",
                    a.as_slice(),
                    b.as_slice()
                )));
            }
        }
    }
    let mut out = ModeVisits {
        visits: vec![0; centers.len()],
        unassigned: 0,
        crossings: 0,
    };
    let mut last: Option<usize> = None;
    for p in trace {
        let p = p.as_ref();
        let nearest = centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dist(p, c)))
            .filter(|&(_, d)| d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((i, _)) => {
                out.visits[i] += 1;
                if last.is_some_and(|l| l != i) {
                    out.crossings += 1;
                }
                last = Some(i);
            }
            None => out.unassigned += 1,
        }
    }
    Ok(out)
}

/// Centered moving average with window `2·half + 1`, shrinking at the ends.
pub fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
