//! Threshold test on stop counts against a residential benchmark.
//!
//! Within a location, stops of each race arrive in proportion to the
//! residential share `c_rd` times the probability `s_rd` that a resident's
//! risk exceeds the stop threshold, so the racial composition of `N_d` stops
//! is Multinomial with `theta_rd ∝ c_rd s_rd`. Every stop is treated as a
//! search, and hits among stops are Binomial(`S_rd`, `E[P | P > t_rd]`).

use crate::error::{Error, Result};
use crate::model::cell::{CellEval, Grad3};
use crate::model::frisk::scatter;
use crate::model::{Layout, ModelParams, PriorConfig};
use crate::sampler::LogDensity;
use crate::special::{ln_choose, log_sum_exp_slice};
use serde::{Deserialize, Serialize};

/// Census shares below this are raised to it before renormalizing.
pub const CENSUS_FLOOR: f64 = 1e-4;

/// Per-race stop and hit counts in one location, plus its residential mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecinctStopData {
    pub location: usize,
    pub stops: Vec<u64>,
    pub hits: Vec<u64>,
    /// Residential shares or counts by race; normalized on model construction.
    pub census: Vec<f64>,
}

impl PrecinctStopData {
    fn validate(&self, layout: &Layout) -> Result<()> {
        let r = layout.races;
        if self.stops.len() != r || self.hits.len() != r || self.census.len() != r {
            return Err(Error::DimensionMismatch(format!(
                "location {} needs {r} entries for stops, hits and census",
                self.location
            )));
        }
        if self.location >= layout.locations {
            return Err(Error::DimensionMismatch(format!("location {} out of range", self.location)));
        }
        if self.hits.iter().zip(&self.stops).any(|(h, s)| h > s) {
            return Err(Error::InvalidData(format!("location {} has hits > stops", self.location)));
        }
        if self.census.iter().any(|c| !(c.is_finite() && *c >= 0.0)) || self.census.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidData(format!(
                "location {} needs non-negative census with positive total",
                self.location
            )));
        }
        Ok(())
    }

    fn normalize_census(&mut self) {
        let total: f64 = self.census.iter().sum();
        let mut floored = false;
        for c in &mut self.census {
            *c /= total;
            if *c < CENSUS_FLOOR {
                *c = CENSUS_FLOOR;
                floored = true;
            }
        }
        if floored {
            log::warn!("location {}: census share floored at {CENSUS_FLOOR}", self.location);
            let total: f64 = self.census.iter().sum();
            self.census.iter_mut().for_each(|c| *c /= total);
        }
    }
}

#[derive(Debug, Clone)]
pub struct StopModel {
    layout: Layout,
    precincts: Vec<PrecinctStopData>,
    ln_census: Vec<Vec<f64>>,
    priors: PriorConfig,
    ln_const: f64,
}

/// Probability that a resident of race `r` in location `d` is stopped: the
/// share of the cell's risk distribution above its threshold.
pub fn stop_probability(params: &ModelParams, r: usize, d: usize) -> f64 {
    params.derived_rates(r, d).search_rate
}

impl StopModel {
    pub fn new(layout: Layout, mut precincts: Vec<PrecinctStopData>, priors: PriorConfig) -> Result<Self> {
        priors.validate()?;
        for p in &mut precincts {
            p.validate(&layout)?;
            p.normalize_census();
        }
        let ln_census = precincts.iter().map(|p| p.census.iter().map(|c| c.ln()).collect()).collect();
        let mut ln_const = 0.0;
        for p in &precincts {
            let mut remaining: u64 = p.stops.iter().sum();
            for (s, h) in p.stops.iter().zip(&p.hits) {
                ln_const += ln_choose(remaining, *s) + ln_choose(*s, *h);
                remaining -= s;
            }
        }
        Ok(Self { layout, precincts, ln_census, priors, ln_const })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn precincts(&self) -> &[PrecinctStopData] {
        &self.precincts
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn stop_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.layout.races * self.layout.locations];
        for p in &self.precincts {
            for (r, s) in p.stops.iter().enumerate() {
                w[self.layout.cell_index(r, p.location)] += *s as f64;
            }
        }
        w
    }

    /// Model-implied racial composition of stops at a location.
    pub fn composition(params: &ModelParams, location: usize, census: &[f64]) -> Result<Vec<f64>> {
        let l = params.layout;
        if census.len() != l.races || location >= l.locations {
            return Err(Error::DimensionMismatch("census or location does not match layout".into()));
        }
        if census.iter().any(|c| !(*c >= 0.0)) || census.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidData("census shares must be non-negative with a positive total".into()));
        }
        let ln_w: Vec<f64> = (0..l.races)
            .map(|r| {
                let e = CellEval::new(
                    params.logit_phi(r, location),
                    params.ln_delta(r, location),
                    params.logit_threshold[l.cell_index(r, location)],
                );
                census[r].ln() + e.ln_ccdf()
            })
            .collect();
        let z = log_sum_exp_slice(&ln_w);
        Ok(ln_w.iter().map(|w| (w - z).exp()).collect())
    }

    pub fn log_posterior(&self, params: &ModelParams) -> Result<f64> {
        params.validate()?;
        if params.layout != self.layout {
            return Err(Error::DimensionMismatch("parameters built for another layout".into()));
        }
        let theta = params.to_unconstrained();
        let mut grad = vec![0.0; theta.len()];
        Ok(self.log_posterior_grad(&theta, &mut grad))
    }

    /// Log posterior and its gradient at an unconstrained vector laid out as
    /// in [`Layout`].
    pub fn log_posterior_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let lp = self.priors.log_prior_grad(&self.layout, theta, grad);
        lp + self.log_likelihood_grad(theta, grad)
    }

    fn log_likelihood_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let races = l.races;
        let mut ll = self.ln_const;
        let mut evals = Vec::with_capacity(races);
        let mut ln_w = vec![0.0; races];
        for (p, ln_c) in self.precincts.iter().zip(&self.ln_census) {
            let n: u64 = p.stops.iter().sum();
            if n == 0 {
                continue;
            }
            let d = p.location;
            evals.clear();
            for r in 0..races {
                let lp = theta[l.phi_race(r)] + l.phi_loc(d).map_or(0.0, |i| theta[i]);
                let ld = theta[l.lambda_race(r)] + l.lambda_loc(d).map_or(0.0, |i| theta[i]);
                let e = CellEval::new(lp, ld, theta[l.logit_threshold(r, d)]);
                let (v, dv) = e.ln_ccdf_grad();
                ln_w[r] = ln_c[r] + v;
                evals.push((e, v, dv));
            }
            let z = log_sum_exp_slice(&ln_w);
            for r in 0..races {
                let (e, v, dv) = &evals[r];
                let s = p.stops[r] as f64;
                let h = p.hits[r] as f64;
                let share = (ln_w[r] - z).exp();
                if s > 0.0 {
                    ll += s * (ln_w[r] - z);
                    ll += h * (e.pos_above - v) + (s - h) * (e.neg_above - v);
                }
                let mut g: Grad3 = [0.0; 3];
                for i in 0..3 {
                    g[i] = -(n as f64) * share * dv[i] + h * e.d_pos_above[i] + (s - h) * e.d_neg_above[i];
                }
                scatter(l, r, d, &g, grad);
            }
        }
        ll
    }
}

impl LogDensity for StopModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_grad(theta, grad)
    }

    fn parameter_names(&self) -> Vec<String> {
        self.layout.parameter_names()
    }
}
