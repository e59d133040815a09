//! Fitting a threshold model end to end: sample, diagnose, summarize.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{extract_thresholds, FriskModel, Layout, ModelParams, StopModel, ThresholdSummary};
use crate::sampler::{diagnose, sample, Diagnostics, LogDensity, PosteriorDraws, SamplerConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub layout: Layout,
    pub draws: PosteriorDraws,
    /// `None` when there are too few chains or draws to diagnose.
    pub diagnostics: Option<Diagnostics>,
    pub thresholds: ThresholdSummary,
    /// Parameters at the posterior mean of the unconstrained vector. Use the
    /// posterior PPC functions for predictions; this point can sit off a
    /// curved posterior ridge.
    pub posterior_mean: ModelParams,
}

fn fit<T: LogDensity>(target: &T, layout: Layout, weights: &[f64], cfg: &SamplerConfig) -> Result<FitResult> {
    let draws = sample(target, cfg)?;
    let diagnostics = match diagnose(&draws) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("skipping diagnostics: {e}");
            None
        }
    };
    if let Some(d) = &diagnostics {
        let rate = d.divergences as f64 / d.total_samples as f64;
        if rate > 0.01 {
            log::warn!("{:.2}% of transitions diverged", 100.0 * rate);
        }
    }
    let thresholds = extract_thresholds(&draws, &layout, weights)?;
    let posterior_mean = ModelParams::from_unconstrained(layout, &draws.mean())?;
    Ok(FitResult { layout, draws, diagnostics, thresholds, posterior_mean })
}

pub fn fit_frisk(model: &FriskModel, cfg: &SamplerConfig) -> Result<FitResult> {
    fit(model, model.layout(), &model.stop_weights(), cfg)
}

pub fn fit_stop(model: &StopModel, cfg: &SamplerConfig) -> Result<FitResult> {
    fit(model, model.layout(), &model.stop_weights(), cfg)
}
