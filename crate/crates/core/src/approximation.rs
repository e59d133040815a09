//! Approximating beta and logit-normal distributions by discriminant
//! distributions under total-variation distance.
//!
//! Every density is handled on the logit scale `u = logit(t)`. Total variation
//! is invariant under that bijection, and on the logit scale the densities are
//! smooth and bounded: a discriminant distribution becomes a two-component
//! normal mixture, a logit-normal a single normal, and a beta density decays
//! exponentially in both directions instead of diverging at the endpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DiscParams, RefDist};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadConfig};
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::special::{ln_beta_fn, ln_norm_pdf, logistic, logit, softplus};

/// Mass we allow to fall outside the integration window on each side.
const TAIL_MASS: f64 = 1e-12;

/// A distribution on (0, 1) described through the density of its logit.
pub trait UnitDensity: Sync {
    fn ln_pdf_logit(&self, u: f64) -> f64;

    /// Logit-scale window outside which the mass is negligible.
    fn logit_extent(&self) -> (f64, f64);

    /// Points where the density has structure (modes, shoulders) that the
    /// quadrature should resolve.
    fn logit_landmarks(&self) -> Vec<f64>;

    fn pdf_logit(&self, u: f64) -> f64 {
        self.ln_pdf_logit(u).exp()
    }
}

impl UnitDensity for DiscParams {
    fn ln_pdf_logit(&self, u: f64) -> f64 {
        // u = logit(phi) + delta * (x - delta / 2) is affine in the signal
        let x = (u - logit(self.phi())) / self.delta() + 0.5 * self.delta();
        self.ln_signal_density(x) - self.delta().ln()
    }

    fn logit_extent(&self) -> (f64, f64) {
        let (lo, hi, d) = self.component_centers();
        (lo - 10.0 * d, hi + 10.0 * d)
    }

    fn logit_landmarks(&self) -> Vec<f64> {
        let (lo, hi, d) = self.component_centers();
        vec![lo - d, lo, lo + d, hi - d, hi, hi + d]
    }
}

impl DiscParams {
    fn component_centers(&self) -> (f64, f64, f64) {
        let l = logit(self.phi());
        let half = 0.5 * self.delta() * self.delta();
        (l - half, l + half, self.delta())
    }
}

impl UnitDensity for RefDist {
    fn ln_pdf_logit(&self, u: f64) -> f64 {
        match *self {
            RefDist::LogitNormal { mu, sigma } => ln_norm_pdf((u - mu) / sigma) - sigma.ln(),
            RefDist::Beta { .. } => {
                let (a, b) = self.beta_shapes().unwrap();
                -a * softplus(-u) - b * softplus(u) - ln_beta_fn(a, b)
            }
        }
    }

    fn logit_extent(&self) -> (f64, f64) {
        match *self {
            RefDist::LogitNormal { mu, sigma } => (mu - 10.0 * sigma, mu + 10.0 * sigma),
            RefDist::Beta { .. } => {
                let (a, b) = self.beta_shapes().unwrap();
                let (mode, scale) = beta_logit_mode(a, b);
                let ln_b = ln_beta_fn(a, b);
                // P(U < u) ~ exp(a u) / (a B) far in the lower tail, and symmetrically above
                let lower = (TAIL_MASS.ln() + a.ln() + ln_b) / a;
                let upper = -(TAIL_MASS.ln() + b.ln() + ln_b) / b;
                (lower.min(mode - 12.0 * scale), upper.max(mode + 12.0 * scale))
            }
        }
    }

    fn logit_landmarks(&self) -> Vec<f64> {
        match *self {
            RefDist::LogitNormal { mu, sigma } => vec![mu - sigma, mu, mu + sigma],
            RefDist::Beta { .. } => {
                let (a, b) = self.beta_shapes().unwrap();
                let (mode, scale) = beta_logit_mode(a, b);
                vec![mode - 2.0 * scale, mode - scale, mode, mode + scale, mode + 2.0 * scale]
            }
        }
    }
}

/// Mode and curvature scale of a beta density on the logit scale.
fn beta_logit_mode(a: f64, b: f64) -> (f64, f64) {
    let mode = (a / b).ln();
    let scale = ((a + b) / (a * b)).sqrt();
    (mode, scale)
}

/// A density tabulated on a logit grid with log-linear interpolation.
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    grid: Vec<f64>,
    ln_values: Vec<f64>,
}

impl TabulatedDensity {
    /// Tabulates `source` at `n` equally spaced logit points across its extent.
    pub fn from_density(source: &dyn UnitDensity, n: usize) -> Self {
        let (lo, hi) = source.logit_extent();
        let grid: Vec<f64> =
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let ln_values = grid.iter().map(|&u| source.ln_pdf_logit(u)).collect();
        Self { grid, ln_values }
    }

    pub fn new(grid: Vec<f64>, ln_values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != ln_values.len() {
            return Err(Error::InvalidParameter("tabulation needs matching grids".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("tabulation grid must increase".into()));
        }
        Ok(Self { grid, ln_values })
    }
}

impl UnitDensity for TabulatedDensity {
    fn ln_pdf_logit(&self, u: f64) -> f64 {
        let n = self.grid.len();
        if u < self.grid[0] || u > self.grid[n - 1] {
            return f64::NEG_INFINITY;
        }
        let i = self.grid.partition_point(|&g| g <= u).clamp(1, n - 1);
        let (u0, u1) = (self.grid[i - 1], self.grid[i]);
        let w = (u - u0) / (u1 - u0);
        (1.0 - w) * self.ln_values[i - 1] + w * self.ln_values[i]
    }

    fn logit_extent(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    fn logit_landmarks(&self) -> Vec<f64> {
        let argmax = self
            .ln_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        vec![self.grid[argmax]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvConfig {
    /// Equal-width panels the logit window is cut into before adaptive refinement.
    pub panels: usize,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self { panels: 48, abs_tol: 1e-7, max_intervals: 4000 }
    }
}

impl TvConfig {
    /// Twice the resolution in every respect.
    pub fn refined(&self) -> Self {
        Self { panels: 2 * self.panels, abs_tol: 0.5 * self.abs_tol, max_intervals: 2 * self.max_intervals }
    }
}

fn breakpoints(densities: &[&dyn UnitDensity], panels: usize) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in densities {
        let (a, b) = d.logit_extent();
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let mut pts: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect();
    for d in densities {
        pts.extend(d.logit_landmarks().into_iter().filter(|&u| u > lo && u < hi));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// `0.5 * integral |f - g|`.
pub fn tv_distance(a: &dyn UnitDensity, b: &dyn UnitDensity, cfg: &TvConfig) -> f64 {
    let breaks = breakpoints(&[a, b], cfg.panels);
    let quad = QuadConfig { abs_tol: cfg.abs_tol, rel_tol: 0.0, max_intervals: cfg.max_intervals };
    let r = integrate_with_breaks(|u| (a.pdf_logit(u) - b.pdf_logit(u)).abs(), &breaks, &quad);
    (0.5 * r.value).clamp(0.0, 1.0)
}

/// `E[P^k]` for `k = 1, 2`.
pub fn moments(d: &dyn UnitDensity) -> (f64, f64) {
    let breaks = breakpoints(&[d], 32);
    let quad = QuadConfig { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000 };
    let m1 = integrate_with_breaks(|u| logistic(u) * d.pdf_logit(u), &breaks, &quad).value;
    let m2 = integrate_with_breaks(|u| logistic(u).powi(2) * d.pdf_logit(u), &breaks, &quad).value;
    (m1, m2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub target: RefDist,
    pub fitted: DiscParams,
    pub tv_distance: f64,
    pub optimizer_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub tv: TvConfig,
    pub optimizer: NelderMeadConfig,
    /// Fixed separation starts, tried in addition to a moment-matched one.
    pub delta_starts: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tv: TvConfig::default(),
            optimizer: NelderMeadConfig { max_evals: 2000, step: 0.5, f_tol: 1e-8, x_tol: 1e-4 },
            delta_starts: vec![0.5, 1.0, 2.0, 4.0],
        }
    }
}

const MAX_LN_DELTA: f64 = 4.5;
const MAX_ABS_LOGIT_PHI: f64 = 25.0;

/// Separation whose discriminant variance matches `variance` at the given `phi`.
fn moment_matched_delta(phi: f64, variance: f64) -> f64 {
    let var_at = |ln_delta: f64| {
        let d = DiscParams::new(phi, ln_delta.exp()).expect("valid by construction");
        let (m1, m2) = moments(&d);
        m2 - m1 * m1
    };
    let (mut lo, mut hi) = (-6.0f64, MAX_LN_DELTA);
    if var_at(hi) <= variance {
        return hi.exp();
    }
    if var_at(lo) >= variance {
        return lo.exp();
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if var_at(mid) < variance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Best discriminant approximation of `target` found by multi-start
/// Nelder-Mead over `(logit phi, ln delta)`.
pub fn fit_density(target: &dyn UnitDensity, cfg: &FitConfig) -> Result<(DiscParams, f64, usize)> {
    let (mean, second) = moments(target);
    let mean = mean.clamp(1e-9, 1.0 - 1e-9);
    let mut starts: Vec<f64> = cfg.delta_starts.clone();
    starts.push(moment_matched_delta(mean, (second - mean * mean).max(0.0)));

    let objective = |x: &[f64]| {
        if x[1] > MAX_LN_DELTA || x[0].abs() > MAX_ABS_LOGIT_PHI {
            return 1.0 + x[1].max(x[0].abs());
        }
        let d = DiscParams::from_logit(x[0], x[1].exp());
        tv_distance(&d, target, &cfg.tv)
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut total_evals = 0;
    let mut any_converged = false;
    for delta0 in starts {
        let r = nelder_mead(objective, &[logit(mean), delta0.ln()], &cfg.optimizer);
        total_evals += r.evals;
        any_converged |= r.converged;
        if best.as_ref().is_none_or(|b| r.fx < b.1) {
            best = Some((r.x, r.fx));
        }
    }
    if !any_converged {
        return Err(Error::NonConvergence { evals: cfg.optimizer.max_evals });
    }
    let (x, tv) = best.unwrap();
    let fitted = DiscParams::new(logistic(x[0]), x[1].exp())?;
    Ok((fitted, tv, total_evals))
}

pub fn fit_disc(target: &RefDist, cfg: &FitConfig) -> Result<ApproxResult> {
    target.validate()?;
    let (fitted, tv_distance, optimizer_evals) = fit_density(target, cfg)?;
    Ok(ApproxResult { target: *target, fitted, tv_distance, optimizer_evals })
}

/// Parameter grids for the approximation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxGrid {
    pub logit_normal_mu: Vec<f64>,
    pub logit_normal_sigma: Vec<f64>,
    pub beta_phi: Vec<f64>,
    pub beta_lambda: Vec<f64>,
}

impl Default for ApproxGrid {
    fn default() -> Self {
        Self {
            logit_normal_mu: vec![-4.0, -3.0, -2.0, -1.0, 0.0],
            logit_normal_sigma: vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            beta_phi: vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            beta_lambda: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        }
    }
}

/// The grid shipped with the crate, identical to `ApproxGrid::default()`.
pub const BUNDLED_GRID: &str = include_str!("../data/approx_grid.toml");

impl ApproxGrid {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let grid: Self = toml::from_str(s).map_err(|e| Error::InvalidParameter(format!("bad grid file: {e}")))?;
        grid.targets()?;
        Ok(grid)
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_GRID).expect("bundled grid parses")
    }

    pub fn targets(&self) -> Result<Vec<RefDist>> {
        let mut out = Vec::new();
        for &mu in &self.logit_normal_mu {
            for &sigma in &self.logit_normal_sigma {
                out.push(RefDist::logit_normal(mu, sigma)?);
            }
        }
        for &phi in &self.beta_phi {
            for &lambda in &self.beta_lambda {
                out.push(RefDist::beta(phi, lambda)?);
            }
        }
        Ok(out)
    }
}

/// Fits every grid target independently, in parallel. Output order follows
/// [`ApproxGrid::targets`].
pub fn sweep(grid: &ApproxGrid, cfg: &FitConfig) -> Result<Vec<Result<ApproxResult>>> {
    let targets = grid.targets()?;
    Ok(targets.par_iter().map(|t| fit_disc(t, cfg)).collect())
}
