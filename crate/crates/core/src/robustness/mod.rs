//! Robustness checks: synthetic data, posterior predictive checks, threshold
//! noise, placebo labels, subset fits and census sensitivity.
//!
//! Sweeps fit their variants in parallel on the current rayon pool, and each
//! fit parallelizes over chains on the same pool. Wrap calls in
//! [`with_worker_budget`] to cap the total number of threads.

mod ppc;
mod synthetic;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_frisk, fit_stop, FitResult};
use crate::model::{FriskModel, GroupThreshold, Layout, ModelParams, PrecinctStopData, PriorConfig, StopModel};
use crate::records::{aggregate, aggregate_with_levels, RawStopRecord};
use crate::sampler::SamplerConfig;

pub use ppc::{ppc_frisk, ppc_frisk_posterior, ppc_stop, ppc_stop_posterior, PpcCell, PpcReport, REFERENCE_HIT_RMSE, REFERENCE_RATE_RMSE};
pub use synthetic::{generate, generate_records, generate_stop_data, StopSyntheticSpec, SyntheticSpec};

/// Noise levels for the threshold-heterogeneity sweep.
pub const DEFAULT_SIGMAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Multipliers applied to one race's census share in the sensitivity sweep.
pub const DEFAULT_CENSUS_FACTORS: [f64; 3] = [0.5, 1.0, 2.0];

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_worker_budget<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Frisk,
    Stop,
}

/// Whether two 95% intervals overlap.
pub fn intervals_overlap(a: &GroupThreshold, b: &GroupThreshold) -> bool {
    a.lower <= b.upper && b.lower <= a.upper
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeterogeneityPoint {
    pub sigma: f64,
    pub fit: FitResult,
}

/// Regenerates data from `base` at each noise level (with common random
/// numbers across levels) and refits the frisk model.
pub fn heterogeneity_sweep(
    base: &SyntheticSpec,
    sigmas: &[f64],
    priors: &PriorConfig,
    cfg: &SamplerConfig,
) -> Result<Vec<HeterogeneityPoint>> {
    sigmas
        .par_iter()
        .map(|&sigma| {
            let spec = SyntheticSpec { heterogeneity_sigma: sigma, ..base.clone() };
            let cells = generate(&spec)?;
            let model = FriskModel::new(base.params.layout, cells, *priors)?;
            Ok(HeterogeneityPoint { sigma, fit: fit_frisk(&model, cfg)? })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaceboResult {
    pub column: String,
    pub levels: Vec<String>,
    pub locations: Vec<String>,
    pub fit: FitResult,
    /// `(i, j, overlap)` for every pair of levels.
    pub pairs: Vec<(usize, usize, bool)>,
}

impl PlaceboResult {
    pub fn all_overlap(&self) -> bool {
        self.pairs.iter().all(|p| p.2)
    }

    pub fn all_separate(&self) -> bool {
        self.pairs.iter().all(|p| !p.2)
    }
}

/// Refits with race replaced by the value of `column`. The stop model is
/// refused: its census benchmark is defined by race, so a relabeled group
/// has no base rate and the model is not identified.
pub fn placebo(
    records: &[RawStopRecord],
    column: &str,
    kind: ModelKind,
    priors: &PriorConfig,
    cfg: &SamplerConfig,
) -> Result<PlaceboResult> {
    if kind == ModelKind::Stop {
        return Err(Error::Identifiability(
            "placebo labels have no census base rate, so the stop model is not identified".into(),
        ));
    }
    let relabeled = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let label = if column == "race" { Some(&r.race) } else { r.extra.get(column) };
            let label = label
                .filter(|v| !v.is_empty())
                .ok_or_else(|| Error::InvalidData(format!("record {i} has no value for '{column}'")))?;
            Ok(RawStopRecord { race: label.clone(), ..r.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = aggregate(&relabeled)?;
    // sort levels so results do not depend on record order
    let mut levels = data.races.clone();
    levels.sort();
    if levels != data.races {
        data = aggregate_with_levels(&relabeled, &levels, &data.locations)?;
    }
    let model = FriskModel::new(data.layout()?, data.cells.clone(), *priors)?;
    let fit = fit_frisk(&model, cfg)?;
    let g = &fit.thresholds.races;
    let mut pairs = Vec::new();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            pairs.push((i, j, intervals_overlap(&g[i], &g[j])));
        }
    }
    Ok(PlaceboResult { column: column.into(), levels, locations: data.locations, fit, pairs })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelFit {
    pub level: String,
    pub records: usize,
    pub fit: FitResult,
}

/// Independent frisk fits for each value of `column`, all on the race and
/// precinct levels of the full data. Levels listed in `levels` without any
/// records are skipped with a warning.
pub fn subset_disaggregate(
    records: &[RawStopRecord],
    column: &str,
    levels: Option<&[String]>,
    priors: &PriorConfig,
    cfg: &SamplerConfig,
) -> Result<(Vec<String>, Vec<String>, Vec<LevelFit>)> {
    let all = aggregate(records)?;
    let value = |r: &RawStopRecord| r.extra.get(column).cloned().unwrap_or_default();
    let wanted: Vec<String> = match levels {
        Some(l) => l.to_vec(),
        None => records.iter().map(value).filter(|v| !v.is_empty()).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let missing = records.iter().filter(|r| value(r).is_empty()).count();
    if missing > 0 {
        log::warn!("{missing} records have no value for '{column}' and are ignored");
    }
    let subsets: Vec<(String, Vec<RawStopRecord>)> = wanted
        .into_iter()
        .filter_map(|level| {
            let subset: Vec<RawStopRecord> = records.iter().filter(|r| value(r) == level).cloned().collect();
            if subset.is_empty() {
                log::warn!("level '{level}' of '{column}' has no records; skipped");
                None
            } else {
                Some((level, subset))
            }
        })
        .collect();
    let fits = subsets
        .into_par_iter()
        .map(|(level, subset)| {
            let data = aggregate_with_levels(&subset, &all.races, &all.locations)?;
            let model = FriskModel::new(data.layout()?, data.cells, *priors)?;
            Ok(LevelFit { level, records: subset.len(), fit: fit_frisk(&model, cfg)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((all.races, all.locations, fits))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusPoint {
    pub factor: f64,
    pub fit: FitResult,
}

/// Multiplies race `race`'s census share in every location by each factor,
/// renormalizes, and refits the stop model.
pub fn census_sweep(
    layout: Layout,
    precincts: &[PrecinctStopData],
    race: usize,
    factors: &[f64],
    priors: &PriorConfig,
    cfg: &SamplerConfig,
) -> Result<Vec<CensusPoint>> {
    if race >= layout.races {
        return Err(Error::DimensionMismatch(format!("race {race} outside layout")));
    }
    if factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidParameter("census factors must be positive".into()));
    }
    factors
        .par_iter()
        .map(|&factor| {
            let scaled: Vec<PrecinctStopData> = precincts
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    let total: f64 = p.census.iter().sum();
                    p.census.iter_mut().for_each(|c| *c /= total);
                    p.census[race] *= factor;
                    p
                })
                .collect();
            let model = StopModel::new(layout, scaled, *priors)?;
            Ok(CensusPoint { factor, fit: fit_stop(&model, cfg)? })
        })
        .collect()
}

/// Ratio of the stop-weighted aggregate search rate after shifting race
/// `race`'s logit thresholds by `shift` to the rate before.
pub fn aggregate_rate_ratio(params: &ModelParams, stops: &[f64], race: usize, shift: f64) -> Result<f64> {
    let l = params.layout;
    if stops.len() != l.races * l.locations || race >= l.races {
        return Err(Error::DimensionMismatch("one stop weight per cell required".into()));
    }
    let rate = |p: &ModelParams| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for r in 0..l.races {
            for d in 0..l.locations {
                let w = stops[l.cell_index(r, d)];
                num += w * p.derived_rates(r, d).search_rate;
                den += w;
            }
        }
        num / den
    };
    let mut shifted = params.clone();
    for d in 0..l.locations {
        shifted.logit_threshold[l.cell_index(race, d)] += shift;
    }
    Ok(rate(&shifted) / rate(params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stop_placebo_is_refused() {
        let err = placebo(&[], "day", ModelKind::Stop, &PriorConfig::default(), &SamplerConfig::default());
        assert!(matches!(err, Err(Error::Identifiability(_))));
    }

    #[test]
    fn lowering_a_threshold_raises_the_aggregate_rate() {
        let l = Layout::new(2, 1).unwrap();
        let p = ModelParams::from_race_effects(l, vec![-1.0, -1.0], vec![0.0, 0.0], vec![-1.0, -1.0]).unwrap();
        let ratio = aggregate_rate_ratio(&p, &[1.0, 1.0], 1, -1.0).unwrap();
        assert!(ratio > 1.0);
    }
}
