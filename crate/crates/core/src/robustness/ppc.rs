//! Posterior predictive checks: model-implied search (or stop-share) and
//! hit rates against the observed ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CellCounts, Layout, ModelParams, PrecinctStopData, StopModel};
use crate::sampler::PosteriorDraws;

/// Frisk-rate and hit-rate RMSE reported on the full city dataset, kept in
/// reports as a reference scale.
pub const REFERENCE_RATE_RMSE: f64 = 0.0005;
pub const REFERENCE_HIT_RMSE: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcCell {
    pub race: usize,
    pub location: usize,
    pub stops: u64,
    /// Search rate for the frisk model; share of the location's stops for
    /// the stop model.
    pub observed_rate: f64,
    pub predicted_rate: f64,
    /// `None` when nothing was searched.
    pub observed_hit_rate: Option<f64>,
    pub predicted_hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub cells: Vec<PpcCell>,
    /// Stop-weighted RMSE of the search (or stop-share) rate.
    pub rate_rmse: f64,
    /// Stop-weighted RMSE of the hit rate over cells with searches.
    pub hit_rmse: f64,
    pub reference_rate_rmse: f64,
    pub reference_hit_rmse: f64,
}

impl PpcReport {
    fn from_cells(cells: Vec<PpcCell>) -> Self {
        let weighted_rmse = |pairs: Vec<(f64, f64)>| {
            let total: f64 = pairs.iter().map(|(w, _)| w).sum();
            if total > 0.0 {
                (pairs.iter().map(|(w, e)| w * e * e).sum::<f64>() / total).sqrt()
            } else {
                0.0
            }
        };
        let rate_rmse = weighted_rmse(
            cells.iter().filter(|c| c.stops > 0).map(|c| (c.stops as f64, c.observed_rate - c.predicted_rate)).collect(),
        );
        let hit_rmse = weighted_rmse(
            cells
                .iter()
                .filter_map(|c| c.observed_hit_rate.map(|h| (c.stops as f64, h - c.predicted_hit_rate)))
                .collect(),
        );
        Self {
            cells,
            rate_rmse,
            hit_rmse,
            reference_rate_rmse: REFERENCE_RATE_RMSE,
            reference_hit_rmse: REFERENCE_HIT_RMSE,
        }
    }
}

fn frisk_cells(params: &ModelParams, cells: &[CellCounts]) -> Result<Vec<PpcCell>> {
    let l = params.layout;
    let mut out = Vec::with_capacity(cells.len());
    for c in cells {
        if c.race >= l.races || c.location >= l.locations {
            return Err(Error::DimensionMismatch(format!("cell ({}, {}) outside layout", c.race, c.location)));
        }
        let rates = params.derived_rates(c.race, c.location);
        out.push(PpcCell {
            race: c.race,
            location: c.location,
            stops: c.stops,
            observed_rate: if c.stops > 0 { c.searches as f64 / c.stops as f64 } else { f64::NAN },
            predicted_rate: rates.search_rate,
            observed_hit_rate: (c.searches > 0).then(|| c.hits as f64 / c.searches as f64),
            predicted_hit_rate: rates.hit_rate,
        });
    }
    Ok(out)
}

fn stop_cells(params: &ModelParams, precincts: &[PrecinctStopData]) -> Result<Vec<PpcCell>> {
    let mut out = Vec::new();
    for p in precincts {
        let predicted = StopModel::composition(params, p.location, &p.census)?;
        let n: u64 = p.stops.iter().sum();
        for r in 0..params.layout.races {
            let rates = params.derived_rates(r, p.location);
            out.push(PpcCell {
                race: r,
                location: p.location,
                stops: p.stops[r],
                observed_rate: if n > 0 { p.stops[r] as f64 / n as f64 } else { f64::NAN },
                predicted_rate: predicted[r],
                observed_hit_rate: (p.stops[r] > 0).then(|| p.hits[r] as f64 / p.stops[r] as f64),
                predicted_hit_rate: rates.hit_rate,
            });
        }
    }
    Ok(out)
}

/// Averages the predictions of `build` over every posterior draw.
fn averaged(
    draws: &PosteriorDraws,
    layout: Layout,
    build: impl Fn(&ModelParams) -> Result<Vec<PpcCell>>,
) -> Result<PpcReport> {
    if draws.dim != layout.dim() {
        return Err(Error::DimensionMismatch("draws do not match the layout".into()));
    }
    let mut acc: Option<Vec<PpcCell>> = None;
    let mut n = 0usize;
    for theta in draws.iter_draws() {
        let cells = build(&ModelParams::from_unconstrained(layout, theta)?)?;
        n += 1;
        match acc.as_mut() {
            None => acc = Some(cells),
            Some(a) => {
                for (x, y) in a.iter_mut().zip(cells) {
                    x.predicted_rate += y.predicted_rate;
                    x.predicted_hit_rate += y.predicted_hit_rate;
                }
            }
        }
    }
    let mut cells = acc.ok_or_else(|| Error::InvalidData("no posterior draws".into()))?;
    for c in &mut cells {
        c.predicted_rate /= n as f64;
        c.predicted_hit_rate /= n as f64;
    }
    Ok(PpcReport::from_cells(cells))
}

/// Checks frisk counts against the rates implied by `params`.
pub fn ppc_frisk(params: &ModelParams, cells: &[CellCounts]) -> Result<PpcReport> {
    params.validate()?;
    Ok(PpcReport::from_cells(frisk_cells(params, cells)?))
}

/// Checks stop composition and hit rates against `params`.
pub fn ppc_stop(params: &ModelParams, precincts: &[PrecinctStopData]) -> Result<PpcReport> {
    params.validate()?;
    Ok(PpcReport::from_cells(stop_cells(params, precincts)?))
}

/// Frisk check against the posterior mean of each cell's predicted rates.
pub fn ppc_frisk_posterior(draws: &PosteriorDraws, layout: Layout, cells: &[CellCounts]) -> Result<PpcReport> {
    averaged(draws, layout, |p| frisk_cells(p, cells))
}

/// Stop check against the posterior mean of each cell's predicted rates.
pub fn ppc_stop_posterior(
    draws: &PosteriorDraws,
    layout: Layout,
    precincts: &[PrecinctStopData],
) -> Result<PpcReport> {
    averaged(draws, layout, |p| stop_cells(p, precincts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layout;

    #[test]
    fn exact_counts_give_zero_error() {
        let l = Layout::new(1, 1).unwrap();
        let p = ModelParams::from_race_effects(l, vec![-1.0], vec![0.0], vec![-1.0]).unwrap();
        let r = p.derived_rates(0, 0);
        // choose counts whose ratios match the model as closely as integers allow
        let stops = 1_000_000u64;
        let searches = (r.search_rate * stops as f64).round() as u64;
        let hits = (r.hit_rate * searches as f64).round() as u64;
        let rep = ppc_frisk(&p, &[CellCounts { race: 0, location: 0, stops, searches, hits }]).unwrap();
        assert!(rep.rate_rmse < 1e-6 && rep.hit_rmse < 1e-5);
    }

    #[test]
    fn cell_order_does_not_matter() {
        let l = Layout::new(2, 1).unwrap();
        let p = ModelParams::from_race_effects(l, vec![-1.0, -2.0], vec![0.0, 0.5], vec![-1.0, -2.0]).unwrap();
        let a = CellCounts { race: 0, location: 0, stops: 100, searches: 30, hits: 10 };
        let b = CellCounts { race: 1, location: 0, stops: 50, searches: 5, hits: 1 };
        let x = ppc_frisk(&p, &[a, b]).unwrap();
        let y = ppc_frisk(&p, &[b, a]).unwrap();
        assert!((x.rate_rmse - y.rate_rmse).abs() < 1e-15 && (x.hit_rmse - y.hit_rmse).abs() < 1e-15);
    }

    #[test]
    fn posterior_average_of_identical_draws_matches_point_check() {
        let l = Layout::new(2, 1).unwrap();
        let p = ModelParams::from_race_effects(l, vec![-1.0, -2.0], vec![0.0, 0.5], vec![-1.0, -2.0]).unwrap();
        let theta = p.to_unconstrained();
        let draws = PosteriorDraws::from_nested(&[vec![theta.clone(), theta]]).unwrap();
        let cells = [
            CellCounts { race: 0, location: 0, stops: 100, searches: 30, hits: 10 },
            CellCounts { race: 1, location: 0, stops: 50, searches: 5, hits: 1 },
        ];
        let a = ppc_frisk(&p, &cells).unwrap();
        let b = ppc_frisk_posterior(&draws, l, &cells).unwrap();
        assert!((a.rate_rmse - b.rate_rmse).abs() < 1e-14 && (a.hit_rmse - b.hit_rmse).abs() < 1e-14);
    }
}
