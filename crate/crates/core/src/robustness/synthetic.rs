//! Synthetic stop data drawn from the threshold model, optionally with
//! per-stop threshold noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CellCounts, ModelParams, PrecinctStopData};
use crate::records::RawStopRecord;
use crate::special::logistic;

/// Generating parameters for frisk-model data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub params: ModelParams,
    /// Stops per cell in `Layout::cell_index` order.
    pub stops: Vec<u64>,
    /// Per-stop thresholds are `logistic(logit(t_rd) + sigma * Z)`.
    pub heterogeneity_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn uniform(params: ModelParams, stops_per_cell: u64, heterogeneity_sigma: f64, seed: u64) -> Self {
        let n = params.layout.races * params.layout.locations;
        Self { params, stops: vec![stops_per_cell; n], heterogeneity_sigma, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let l = self.params.layout;
        if self.stops.len() != l.races * l.locations {
            return Err(Error::DimensionMismatch("one stop count per cell required".into()));
        }
        if !(self.heterogeneity_sigma >= 0.0 && self.heterogeneity_sigma.is_finite()) {
            return Err(Error::InvalidParameter("heterogeneity_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One encounter in cell `(r, d)`: returns `(acted, hit)` where `acted`
/// means the drawn risk cleared the drawn threshold. Every call consumes
/// the same random numbers regardless of `sigma`.
fn encounter<R: Rng>(params: &ModelParams, r: usize, d: usize, sigma: f64, rng: &mut R) -> (bool, bool) {
    let risk = params.risk(r, d);
    let (_, x) = risk.sample_labeled(rng);
    let logit_p = risk.logit_g(x);
    let z: f64 = rng.sample(StandardNormal);
    let hit_u: f64 = rng.random();
    let logit_threshold = params.logit_threshold[params.layout.cell_index(r, d)] + sigma * z;
    let acted = logit_p >= logit_threshold;
    (acted, acted && hit_u < logistic(logit_p))
}

fn simulate(spec: &SyntheticSpec, mut visit: impl FnMut(usize, usize, bool, bool)) -> Result<()> {
    spec.validate()?;
    let l = spec.params.layout;
    for r in 0..l.races {
        for d in 0..l.locations {
            let cell = l.cell_index(r, d);
            let mut rng = stream_rng(spec.seed, cell);
            for _ in 0..spec.stops[cell] {
                let (frisked, hit) = encounter(&spec.params, r, d, spec.heterogeneity_sigma, &mut rng);
                visit(r, d, frisked, hit);
            }
        }
    }
    Ok(())
}

/// Cell counts for every (race, location) pair, including empty cells.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<CellCounts>> {
    let l = spec.params.layout;
    let mut cells: Vec<CellCounts> = (0..l.races)
        .flat_map(|r| (0..l.locations).map(move |d| CellCounts { race: r, location: d, stops: 0, searches: 0, hits: 0 }))
        .collect();
    simulate(spec, |r, d, frisked, hit| {
        let c = &mut cells[l.cell_index(r, d)];
        c.stops += 1;
        c.searches += frisked as u64;
        c.hits += hit as u64;
    })?;
    Ok(cells)
}

/// The same stops as [`generate`], one record each, labelled with the given
/// race and location names.
pub fn generate_records(spec: &SyntheticSpec, races: &[String], locations: &[String]) -> Result<Vec<RawStopRecord>> {
    let l = spec.params.layout;
    if races.len() != l.races || locations.len() != l.locations {
        return Err(Error::DimensionMismatch("one label per race and location required".into()));
    }
    let mut out = Vec::with_capacity(spec.stops.iter().sum::<u64>() as usize);
    simulate(spec, |r, d, frisked, hit| {
        out.push(RawStopRecord {
            race: races[r].clone(),
            precinct: locations[d].clone(),
            frisked,
            weapon_found: hit,
            extra: Default::default(),
        })
    })?;
    Ok(out)
}

/// Generating parameters for stop-model data: residents of each location
/// are encountered in census proportions and stopped when their risk clears
/// the threshold. Only stops are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopSyntheticSpec {
    pub params: ModelParams,
    /// Census shares by race, one vector per location.
    pub census: Vec<Vec<f64>>,
    /// Encounters per location.
    pub encounters: Vec<u64>,
    pub heterogeneity_sigma: f64,
    pub seed: u64,
}

pub fn generate_stop_data(spec: &StopSyntheticSpec) -> Result<Vec<PrecinctStopData>> {
    spec.params.validate()?;
    let l = spec.params.layout;
    if spec.census.len() != l.locations || spec.encounters.len() != l.locations {
        return Err(Error::DimensionMismatch("one census vector and encounter count per location".into()));
    }
    let mut out = Vec::with_capacity(l.locations);
    for d in 0..l.locations {
        let census = &spec.census[d];
        let total: f64 = census.iter().sum();
        if census.len() != l.races || census.iter().any(|c| !(*c >= 0.0)) || total <= 0.0 {
            return Err(Error::InvalidData(format!("location {d}: invalid census vector")));
        }
        let mut rng = stream_rng(spec.seed, d);
        let mut stops = vec![0u64; l.races];
        let mut hits = vec![0u64; l.races];
        for _ in 0..spec.encounters[d] {
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut r = l.races - 1;
            for (k, c) in census.iter().enumerate() {
                acc += c;
                if u < acc {
                    r = k;
                    break;
                }
            }
            let (stopped, hit) = encounter(&spec.params, r, d, spec.heterogeneity_sigma, &mut rng);
            stops[r] += stopped as u64;
            hits[r] += hit as u64;
        }
        out.push(PrecinctStopData { location: d, stops, hits, census: census.iter().map(|c| c / total).collect() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layout;
    use crate::records::aggregate_with_levels;

    fn params() -> ModelParams {
        let l = Layout::new(2, 2).unwrap();
        ModelParams::from_race_effects(l, vec![-1.5, -1.0], vec![0.2, 0.4], vec![-1.0, -1.6]).unwrap()
    }

    #[test]
    fn records_round_trip_to_counts() {
        let spec = SyntheticSpec::uniform(params(), 500, 0.5, 4);
        let races: Vec<String> = vec!["a".into(), "b".into()];
        let locs: Vec<String> = vec!["x".into(), "y".into()];
        let recs = generate_records(&spec, &races, &locs).unwrap();
        let agg = aggregate_with_levels(&recs, &races, &locs).unwrap();
        assert_eq!(agg.cells, generate(&spec).unwrap());
    }

    #[test]
    fn noise_free_rates_match_closed_form() {
        let p = params();
        let n = 200_000u64;
        let cells = generate(&SyntheticSpec::uniform(p.clone(), n, 0.0, 11)).unwrap();
        for c in &cells {
            let rates = p.derived_rates(c.race, c.location);
            let s = c.searches as f64 / n as f64;
            let se = (rates.search_rate * (1.0 - rates.search_rate) / n as f64).sqrt();
            assert!((s - rates.search_rate).abs() < 4.0 * se, "{s} vs {}", rates.search_rate);
            let h = c.hits as f64 / c.searches as f64;
            let se = (rates.hit_rate * (1.0 - rates.hit_rate) / c.searches as f64).sqrt();
            assert!((h - rates.hit_rate).abs() < 4.0 * se, "{h} vs {}", rates.hit_rate);
        }
    }

    #[test]
    fn stop_data_counts_are_consistent() {
        let spec = StopSyntheticSpec {
            params: params(),
            census: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            encounters: vec![5000, 5000],
            heterogeneity_sigma: 0.0,
            seed: 2,
        };
        let data = generate_stop_data(&spec).unwrap();
        for p in &data {
            assert!(p.hits.iter().zip(&p.stops).all(|(h, s)| h <= s));
            assert!(p.stops.iter().sum::<u64>() > 0);
        }
    }
}
