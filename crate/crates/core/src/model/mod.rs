//! Threshold-test models: shared parameterization, priors and data types.
//!
//! Both models describe each (race, location) cell by a discriminant risk
//! distribution with `logit(phi_rd) = phi_r + phi_d` and
//! `ln(delta_rd) = lambda_r + lambda_d`, and a threshold `t_rd` sampled as
//! `logit(t_rd)`. The first location is the reference: its `phi_d` and
//! `lambda_d` are pinned to zero and are not part of the parameter vector.

mod cell;
pub mod frisk;
pub mod stop;
pub mod thresholds;

use serde::{Deserialize, Serialize};

use crate::distributions::DiscParams;
use crate::error::{Error, Result};
use crate::special::{logistic, LN_SQRT_2PI};

pub use frisk::FriskModel;
pub use stop::{stop_probability, PrecinctStopData, StopModel};
pub use thresholds::{extract_thresholds, CellThreshold, GroupThreshold, ThresholdSummary};

/// Observed counts for one (race, location) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellCounts {
    pub race: usize,
    pub location: usize,
    pub stops: u64,
    pub searches: u64,
    pub hits: u64,
}

impl CellCounts {
    pub fn validate(&self) -> Result<()> {
        if self.hits > self.searches || self.searches > self.stops {
            return Err(Error::InvalidData(format!(
                "cell ({}, {}) needs hits <= searches <= stops, got {} / {} / {}",
                self.race, self.location, self.hits, self.searches, self.stops
            )));
        }
        Ok(())
    }
}

/// Cardinalities of the race and location factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub races: usize,
    pub locations: usize,
}

impl Layout {
    pub fn new(races: usize, locations: usize) -> Result<Self> {
        if races == 0 || locations == 0 {
            return Err(Error::InvalidData("need at least one race and one location".into()));
        }
        Ok(Self { races, locations })
    }

    fn free_locations(&self) -> usize {
        self.locations - 1
    }

    fn has_location_scales(&self) -> bool {
        self.locations > 1
    }

    pub fn phi_race(&self, r: usize) -> usize {
        r
    }

    pub fn lambda_race(&self, r: usize) -> usize {
        self.races + r
    }

    /// Index of `phi_d`, or `None` for the reference location.
    pub fn phi_loc(&self, d: usize) -> Option<usize> {
        (d > 0).then(|| 2 * self.races + d - 1)
    }

    pub fn lambda_loc(&self, d: usize) -> Option<usize> {
        (d > 0).then(|| 2 * self.races + self.free_locations() + d - 1)
    }

    pub fn threshold_center(&self, r: usize) -> usize {
        2 * self.races + 2 * self.free_locations() + r
    }

    pub fn ln_sigma_phi(&self) -> Option<usize> {
        self.has_location_scales().then(|| 3 * self.races + 2 * self.free_locations())
    }

    pub fn ln_sigma_lambda(&self) -> Option<usize> {
        self.has_location_scales().then(|| 3 * self.races + 2 * self.free_locations() + 1)
    }

    fn thresholds_start(&self) -> usize {
        3 * self.races + 2 * self.free_locations() + if self.has_location_scales() { 2 } else { 0 }
    }

    pub fn logit_threshold(&self, r: usize, d: usize) -> usize {
        self.thresholds_start() + r * self.locations + d
    }

    pub fn cell_index(&self, r: usize, d: usize) -> usize {
        r * self.locations + d
    }

    pub fn dim(&self) -> usize {
        self.thresholds_start() + self.races * self.locations
    }

    /// Human-readable name of every coordinate of the parameter vector.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.dim()];
        for r in 0..self.races {
            names[self.phi_race(r)] = format!("phi_race[{r}]");
            names[self.lambda_race(r)] = format!("lambda_race[{r}]");
            names[self.threshold_center(r)] = format!("threshold_center[{r}]");
            for d in 0..self.locations {
                names[self.logit_threshold(r, d)] = format!("logit_t[{r},{d}]");
            }
        }
        for d in 1..self.locations {
            names[self.phi_loc(d).unwrap()] = format!("phi_loc[{d}]");
            names[self.lambda_loc(d).unwrap()] = format!("lambda_loc[{d}]");
        }
        if let (Some(a), Some(b)) = (self.ln_sigma_phi(), self.ln_sigma_lambda()) {
            names[a] = "ln_sigma_phi".into();
            names[b] = "ln_sigma_lambda".into();
        }
        names
    }
}

/// Prior scales. Defaults are weakly informative on race-level quantities
/// and tighter on location offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub phi_race_scale: f64,
    pub lambda_race_scale: f64,
    pub threshold_center_mean: f64,
    pub threshold_center_scale: f64,
    /// Spread of `logit(t_rd)` around its race-level center.
    pub threshold_scale: f64,
    /// Half-normal scale on the location spread of `phi_d`.
    pub phi_loc_scale: f64,
    /// Half-normal scale on the location spread of `lambda_d`.
    pub lambda_loc_scale: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            phi_race_scale: 2.0,
            lambda_race_scale: 2.0,
            threshold_center_mean: -3.0,
            threshold_center_scale: 2.0,
            threshold_scale: 1.0,
            phi_loc_scale: 0.25,
            lambda_loc_scale: 0.25,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            self.phi_race_scale,
            self.lambda_race_scale,
            self.threshold_center_scale,
            self.threshold_scale,
            self.phi_loc_scale,
            self.lambda_loc_scale,
        ];
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) || !self.threshold_center_mean.is_finite() {
            return Err(Error::InvalidParameter("prior scales must be positive and finite".into()));
        }
        Ok(())
    }

    /// Log prior density of an unconstrained parameter vector, including the
    /// Jacobians of the log-scale transforms. Adds the gradient into `grad`.
    pub(crate) fn log_prior_grad(&self, layout: &Layout, theta: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = 0.0;
        let normal = |i: usize, mean: f64, scale: f64, lp: &mut f64, grad: &mut [f64]| {
            let z = (theta[i] - mean) / scale;
            *lp += -0.5 * z * z - scale.ln() - LN_SQRT_2PI;
            grad[i] -= z / scale;
        };
        for r in 0..layout.races {
            normal(layout.phi_race(r), 0.0, self.phi_race_scale, &mut lp, grad);
            normal(layout.lambda_race(r), 0.0, self.lambda_race_scale, &mut lp, grad);
            normal(
                layout.threshold_center(r),
                self.threshold_center_mean,
                self.threshold_center_scale,
                &mut lp,
                grad,
            );
        }
        // logit(t_rd) ~ N(center_r, threshold_scale). The logit-normal density on
        // t_rd and the Jacobian of the logit transform cancel to exactly this.
        let s = self.threshold_scale;
        for r in 0..layout.races {
            let center = theta[layout.threshold_center(r)];
            for d in 0..layout.locations {
                let i = layout.logit_threshold(r, d);
                let z = (theta[i] - center) / s;
                lp += -0.5 * z * z - s.ln() - LN_SQRT_2PI;
                grad[i] -= z / s;
                grad[layout.threshold_center(r)] += z / s;
            }
        }
        if let (Some(i_sp), Some(i_sl)) = (layout.ln_sigma_phi(), layout.ln_sigma_lambda()) {
            for (i_scale, hyper, offset) in [
                (i_sp, self.phi_loc_scale, layout.phi_loc(1).unwrap()),
                (i_sl, self.lambda_loc_scale, layout.lambda_loc(1).unwrap()),
            ] {
                let ln_sigma = theta[i_scale];
                let sigma = ln_sigma.exp();
                // half-normal prior on sigma, plus ln sigma for the log transform
                let z = sigma / hyper;
                lp += std::f64::consts::LN_2 - 0.5 * z * z - hyper.ln() - LN_SQRT_2PI + ln_sigma;
                grad[i_scale] += -z * z + 1.0;
                for k in 0..layout.free_locations() {
                    let i = offset + k;
                    let w = theta[i] / sigma;
                    lp += -0.5 * w * w - ln_sigma - LN_SQRT_2PI;
                    grad[i] -= w / sigma;
                    grad[i_scale] += w * w - 1.0;
                }
            }
        }
        lp
    }
}

/// Model parameters in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layout: Layout,
    pub phi_race: Vec<f64>,
    /// Per location; entry 0 is the reference and must be zero.
    pub phi_loc: Vec<f64>,
    pub lambda_race: Vec<f64>,
    pub lambda_loc: Vec<f64>,
    pub threshold_center: Vec<f64>,
    pub sigma_phi: f64,
    pub sigma_lambda: f64,
    /// `logit(t_rd)`, row-major by race.
    pub logit_threshold: Vec<f64>,
}

impl ModelParams {
    /// All-zero location effects, the given race effects, and every cell of
    /// a race at that race's threshold center.
    pub fn from_race_effects(
        layout: Layout,
        phi_race: Vec<f64>,
        lambda_race: Vec<f64>,
        threshold_center: Vec<f64>,
    ) -> Result<Self> {
        let (rr, dd) = (layout.races, layout.locations);
        if phi_race.len() != rr || lambda_race.len() != rr || threshold_center.len() != rr {
            return Err(Error::DimensionMismatch("race effects must have one entry per race".into()));
        }
        let logit_threshold =
            (0..rr).flat_map(|r| std::iter::repeat_n(threshold_center[r], dd)).collect();
        Ok(Self {
            layout,
            phi_race,
            phi_loc: vec![0.0; dd],
            lambda_race,
            lambda_loc: vec![0.0; dd],
            threshold_center,
            sigma_phi: 0.25,
            sigma_lambda: 0.25,
            logit_threshold,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        let ok = self.phi_race.len() == l.races
            && self.lambda_race.len() == l.races
            && self.threshold_center.len() == l.races
            && self.phi_loc.len() == l.locations
            && self.lambda_loc.len() == l.locations
            && self.logit_threshold.len() == l.races * l.locations;
        if !ok {
            return Err(Error::DimensionMismatch("parameter vectors do not match layout".into()));
        }
        if self.phi_loc[0] != 0.0 || self.lambda_loc[0] != 0.0 {
            return Err(Error::InvalidParameter("reference location effects must be zero".into()));
        }
        if !(self.sigma_phi > 0.0 && self.sigma_lambda > 0.0) {
            return Err(Error::InvalidParameter("location scales must be positive".into()));
        }
        Ok(())
    }

    pub fn logit_phi(&self, r: usize, d: usize) -> f64 {
        self.phi_race[r] + self.phi_loc[d]
    }

    pub fn ln_delta(&self, r: usize, d: usize) -> f64 {
        self.lambda_race[r] + self.lambda_loc[d]
    }

    /// Risk distribution of cell `(r, d)`.
    pub fn risk(&self, r: usize, d: usize) -> DiscParams {
        DiscParams::from_logit(self.logit_phi(r, d), self.ln_delta(r, d).exp())
    }

    /// Threshold `t_rd` on the probability scale.
    pub fn threshold(&self, r: usize, d: usize) -> f64 {
        logistic(self.logit_threshold[self.layout.cell_index(r, d)])
    }

    pub fn derived_rates(&self, r: usize, d: usize) -> DerivedRates {
        let terms = cell::CellEval::new(
            self.logit_phi(r, d),
            self.ln_delta(r, d),
            self.logit_threshold[self.layout.cell_index(r, d)],
        );
        DerivedRates {
            search_rate: terms.ln_ccdf().exp(),
            hit_rate: terms.ln_hit_rate().exp(),
        }
    }

    pub fn to_unconstrained(&self) -> Vec<f64> {
        let l = self.layout;
        let mut theta = vec![0.0; l.dim()];
        for r in 0..l.races {
            theta[l.phi_race(r)] = self.phi_race[r];
            theta[l.lambda_race(r)] = self.lambda_race[r];
            theta[l.threshold_center(r)] = self.threshold_center[r];
            for d in 0..l.locations {
                theta[l.logit_threshold(r, d)] = self.logit_threshold[l.cell_index(r, d)];
            }
        }
        for d in 1..l.locations {
            theta[l.phi_loc(d).unwrap()] = self.phi_loc[d];
            theta[l.lambda_loc(d).unwrap()] = self.lambda_loc[d];
        }
        if let (Some(a), Some(b)) = (l.ln_sigma_phi(), l.ln_sigma_lambda()) {
            theta[a] = self.sigma_phi.ln();
            theta[b] = self.sigma_lambda.ln();
        }
        theta
    }

    pub fn from_unconstrained(layout: Layout, theta: &[f64]) -> Result<Self> {
        if theta.len() != layout.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                layout.dim(),
                theta.len()
            )));
        }
        let l = layout;
        let mut phi_loc = vec![0.0; l.locations];
        let mut lambda_loc = vec![0.0; l.locations];
        for d in 1..l.locations {
            phi_loc[d] = theta[l.phi_loc(d).unwrap()];
            lambda_loc[d] = theta[l.lambda_loc(d).unwrap()];
        }
        let mut logit_threshold = vec![0.0; l.races * l.locations];
        for r in 0..l.races {
            for d in 0..l.locations {
                logit_threshold[l.cell_index(r, d)] = theta[l.logit_threshold(r, d)];
            }
        }
        Ok(Self {
            layout,
            phi_race: (0..l.races).map(|r| theta[l.phi_race(r)]).collect(),
            phi_loc,
            lambda_race: (0..l.races).map(|r| theta[l.lambda_race(r)]).collect(),
            lambda_loc,
            threshold_center: (0..l.races).map(|r| theta[l.threshold_center(r)]).collect(),
            sigma_phi: l.ln_sigma_phi().map_or(0.25, |i| theta[i].exp()),
            sigma_lambda: l.ln_sigma_lambda().map_or(0.25, |i| theta[i].exp()),
            logit_threshold,
        })
    }
}

/// Model-implied observables of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub search_rate: f64,
    pub hit_rate: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_indices_cover_every_coordinate_once() {
        for (r, d) in [(1, 1), (3, 1), (2, 5), (3, 30)] {
            let l = Layout::new(r, d).unwrap();
            let names = l.parameter_names();
            assert_eq!(names.len(), l.dim());
            assert!(names.iter().all(|n| !n.is_empty()));
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), names.len());
        }
    }

    #[test]
    fn unconstrained_round_trip() {
        let l = Layout::new(2, 3).unwrap();
        let theta: Vec<f64> = (0..l.dim()).map(|i| 0.1 * i as f64 - 0.7).collect();
        let p = ModelParams::from_unconstrained(l, &theta).unwrap();
        p.validate().unwrap();
        for (a, b) in p.to_unconstrained().iter().zip(&theta) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(ModelParams::from_unconstrained(l, &theta[1..]).is_err());
    }

    #[test]
    fn derived_rates_match_distribution_functions() {
        let l = Layout::new(1, 1).unwrap();
        let mut p = ModelParams::from_race_effects(l, vec![-1.2], vec![0.4], vec![-2.0]).unwrap();
        p.logit_threshold[0] = -1.7;
        let risk = p.risk(0, 0);
        let t = p.threshold(0, 0);
        let rates = p.derived_rates(0, 0);
        assert!((rates.search_rate - risk.ccdf(t).unwrap()).abs() < 1e-14);
        assert!((rates.hit_rate - risk.conditional_mean(t).unwrap()).abs() < 1e-14);
        assert!(rates.hit_rate > t);
    }

    #[test]
    fn cell_counts_validation() {
        let ok = CellCounts { race: 0, location: 0, stops: 10, searches: 5, hits: 2 };
        assert!(ok.validate().is_ok());
        assert!(CellCounts { hits: 6, ..ok }.validate().is_err());
        assert!(CellCounts { searches: 11, ..ok }.validate().is_err());
    }

    #[test]
    fn prior_rejects_nonpositive_scales() {
        let bad = PriorConfig { threshold_scale: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(PriorConfig::default().validate().is_ok());
    }
}
