//! Threshold test on frisk (search) and hit counts.
//!
//! Given `n` stops in a cell, the number frisked is Binomial(`n`, `s`) with
//! `s = P(P > t)`, and the number of frisks that turn up a weapon is
//! Binomial(frisked, `h`) with `h = E[P | P > t]`.

use crate::error::{Error, Result};
use crate::model::cell::{CellEval, Grad3};
use crate::model::{CellCounts, Layout, ModelParams, PriorConfig};
use crate::sampler::LogDensity;
use crate::special::ln_choose;

#[derive(Debug, Clone)]
pub struct FriskModel {
    layout: Layout,
    cells: Vec<CellCounts>,
    priors: PriorConfig,
    ln_const: f64,
}

impl FriskModel {
    /// Cells with zero stops are accepted and carry no likelihood. Each
    /// (race, location) pair may appear at most once.
    pub fn new(layout: Layout, cells: Vec<CellCounts>, priors: PriorConfig) -> Result<Self> {
        priors.validate()?;
        let mut seen = vec![false; layout.races * layout.locations];
        for c in &cells {
            c.validate()?;
            if c.race >= layout.races || c.location >= layout.locations {
                return Err(Error::DimensionMismatch(format!(
                    "cell ({}, {}) outside a {}x{} layout",
                    c.race, c.location, layout.races, layout.locations
                )));
            }
            let i = layout.cell_index(c.race, c.location);
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidData(format!(
                    "duplicate cell ({}, {})",
                    c.race, c.location
                )));
            }
        }
        let ln_const = cells
            .iter()
            .map(|c| ln_choose(c.stops, c.searches) + ln_choose(c.searches, c.hits))
            .sum();
        Ok(Self { layout, cells, priors, ln_const })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn cells(&self) -> &[CellCounts] {
        &self.cells
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    /// Stop counts indexed by `Layout::cell_index`, used to weight
    /// race-level threshold summaries.
    pub fn stop_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.layout.races * self.layout.locations];
        for c in &self.cells {
            w[self.layout.cell_index(c.race, c.location)] = c.stops as f64;
        }
        w
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

    /// Log-likelihood only, without the prior.
    pub fn log_likelihood(&self, params: &ModelParams) -> f64 {
        let theta = params.to_unconstrained();
        let mut grad = vec![0.0; theta.len()];
        self.log_likelihood_grad(&theta, &mut grad)
    }

    fn log_likelihood_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let l = &self.layout;
        let mut ll = self.ln_const;
        for c in &self.cells {
            if c.stops == 0 {
                continue;
            }
            let (r, d) = (c.race, c.location);
            let lp = theta[l.phi_race(r)] + l.phi_loc(d).map_or(0.0, |i| theta[i]);
            let ld = theta[l.lambda_race(r)] + l.lambda_loc(d).map_or(0.0, |i| theta[i]);
            let e = CellEval::new(lp, ld, theta[l.logit_threshold(r, d)]);

            let not_searched = (c.stops - c.searches) as f64;
            let hits = c.hits as f64;
            let misses = (c.searches - c.hits) as f64;
            let mut g: Grad3 = [0.0; 3];
            if not_searched > 0.0 {
                let (v, dv) = e.ln_cdf_grad();
                ll += not_searched * v;
                for i in 0..3 {
                    g[i] += not_searched * dv[i];
                }
            }
            if hits > 0.0 {
                ll += hits * e.pos_above;
                for i in 0..3 {
                    g[i] += hits * e.d_pos_above[i];
                }
            }
            if misses > 0.0 {
                ll += misses * e.neg_above;
                for i in 0..3 {
                    g[i] += misses * e.d_neg_above[i];
                }
            }
            scatter(l, r, d, &g, grad);
        }
        ll
    }
}

pub(crate) fn scatter(l: &Layout, r: usize, d: usize, g: &Grad3, grad: &mut [f64]) {
    grad[l.phi_race(r)] += g[0];
    grad[l.lambda_race(r)] += g[1];
    if let Some(i) = l.phi_loc(d) {
        grad[i] += g[0];
    }
    if let Some(i) = l.lambda_loc(d) {
        grad[i] += g[1];
    }
    grad[l.logit_threshold(r, d)] += g[2];
}

impl LogDensity for FriskModel {
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

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model() -> FriskModel {
        let layout = Layout::new(2, 3).unwrap();
        let cells = vec![
            CellCounts { race: 0, location: 0, stops: 120, searches: 40, hits: 9 },
            CellCounts { race: 0, location: 1, stops: 80, searches: 10, hits: 4 },
            CellCounts { race: 0, location: 2, stops: 0, searches: 0, hits: 0 },
            CellCounts { race: 1, location: 0, stops: 300, searches: 150, hits: 20 },
            CellCounts { race: 1, location: 2, stops: 55, searches: 30, hits: 0 },
        ];
        FriskModel::new(layout, cells, PriorConfig::default()).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = small_model();
        let theta: Vec<f64> = (0..m.dim()).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.17).collect();
        let coords: [&dyn Fn(&[f64], &mut [f64]) -> f64; 2] =
            [&|x, g| m.log_density_grad(x, g), &|x, g| m.log_posterior_grad(x, g)];
        for f in coords {
            let mut grad = vec![0.0; m.dim()];
            f(&theta, &mut grad);
            let mut scratch = vec![0.0; m.dim()];
            for i in 0..m.dim() {
                let h = 1e-6;
                let mut hi = theta.clone();
                let mut lo = theta.clone();
                hi[i] += h;
                lo[i] -= h;
                let fd = (f(&hi, &mut scratch) - f(&lo, &mut scratch))
                    / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-5 * (1.0 + fd.abs()), "coord {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn rejects_bad_cells() {
        let layout = Layout::new(1, 1).unwrap();
        let dup = vec![CellCounts { race: 0, location: 0, stops: 1, searches: 0, hits: 0 }; 2];
        assert!(FriskModel::new(layout, dup, PriorConfig::default()).is_err());
        let outside = vec![CellCounts { race: 1, location: 0, stops: 1, searches: 0, hits: 0 }];
        assert!(FriskModel::new(layout, outside, PriorConfig::default()).is_err());
    }
}
