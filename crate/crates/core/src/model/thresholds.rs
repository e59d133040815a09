//! Posterior summaries of thresholds on the probability scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Layout;
use crate::sampler::PosteriorDraws;
use crate::special::logistic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellThreshold {
    pub race: usize,
    pub location: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Race-level threshold: a weighted average of cell thresholds, summarized
/// over draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupThreshold {
    pub race: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub cells: Vec<CellThreshold>,
    pub races: Vec<GroupThreshold>,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(mut values: Vec<f64>) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    (mean, quantile(&values, 0.025), quantile(&values, 0.975))
}

/// Summarizes `t_rd` per cell (mean and central 95% interval) and the
/// race-level averages weighted by `weights` (one per cell, typically stop
/// counts). Races with zero total weight fall back to equal weights.
pub fn extract_thresholds(draws: &PosteriorDraws, layout: &Layout, weights: &[f64]) -> Result<ThresholdSummary> {
    if draws.dim != layout.dim() {
        return Err(Error::DimensionMismatch(format!(
            "draws have {} parameters, layout needs {}",
            draws.dim,
            layout.dim()
        )));
    }
    if weights.len() != layout.races * layout.locations {
        return Err(Error::DimensionMismatch("one weight per cell required".into()));
    }
    if draws.total_draws() == 0 {
        return Err(Error::InsufficientDraws("no draws to summarize".into()));
    }
    let (rr, dd) = (layout.races, layout.locations);
    let mut cell_values = vec![Vec::with_capacity(draws.total_draws()); rr * dd];
    let mut race_values = vec![Vec::with_capacity(draws.total_draws()); rr];
    for draw in draws.iter_draws() {
        for r in 0..rr {
            let total: f64 = (0..dd).map(|d| weights[layout.cell_index(r, d)]).sum();
            let mut avg = 0.0;
            for d in 0..dd {
                let t = logistic(draw[layout.logit_threshold(r, d)]);
                cell_values[layout.cell_index(r, d)].push(t);
                let w = if total > 0.0 { weights[layout.cell_index(r, d)] / total } else { 1.0 / dd as f64 };
                avg += w * t;
            }
            race_values[r].push(avg);
        }
    }
    let mut cells = Vec::with_capacity(rr * dd);
    for r in 0..rr {
        for d in 0..dd {
            let (mean, lower, upper) = summarize(std::mem::take(&mut cell_values[layout.cell_index(r, d)]));
            cells.push(CellThreshold { race: r, location: d, mean, lower, upper });
        }
    }
    let races = race_values
        .into_iter()
        .enumerate()
        .map(|(race, v)| {
            let (mean, lower, upper) = summarize(v);
            GroupThreshold { race, mean, lower, upper }
        })
        .collect();
    Ok(ThresholdSummary { cells, races })
}
