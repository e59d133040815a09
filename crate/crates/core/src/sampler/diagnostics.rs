//! Convergence and efficiency diagnostics.
//!
//! R-hat is the rank-normalized split statistic, taking the larger of the
//! bulk and folded versions. Effective sample size uses split chains and
//! Geyer's initial monotone sequence on the combined autocorrelation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::special::norm_quantile;

pub const MIN_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: Vec<f64>,
    pub n_eff: Vec<f64>,
    pub max_rhat: f64,
    pub min_n_eff: f64,
    pub mean_n_eff: f64,
    pub divergences: usize,
    pub total_samples: usize,
    /// Gradient evaluations spent after warmup.
    pub total_steps: usize,
    pub sampling_seconds: f64,
    pub warmup_steps: usize,
    pub warmup_seconds: f64,
    /// Cost decomposition over the sampling phase, using the minimum n_eff.
    /// The first three multiply to `seconds_per_neff`.
    pub samples_per_neff: f64,
    pub steps_per_sample: f64,
    pub seconds_per_step: f64,
    pub seconds_per_neff: f64,
}

/// Requires at least two chains of equal length with 100 or more draws.
pub fn diagnose(draws: &PosteriorDraws) -> Result<Diagnostics> {
    let m = draws.n_chains();
    if m < 2 {
        return Err(Error::InsufficientDraws("R-hat needs at least two chains".into()));
    }
    let n = draws.chains[0].len();
    if draws.chains.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientDraws("chains have unequal lengths".into()));
    }
    if n < MIN_DRAWS {
        return Err(Error::InsufficientDraws(format!("need at least {MIN_DRAWS} draws per chain, got {n}")));
    }

    let mut rhat = Vec::with_capacity(draws.dim);
    let mut n_eff = Vec::with_capacity(draws.dim);
    for k in 0..draws.dim {
        let traces: Vec<Vec<f64>> = (0..m).map(|c| draws.trace(c, k)).collect();
        rhat.push(rank_normalized_rhat(&traces));
        n_eff.push(effective_sample_size(&split(&traces)));
    }
    let max_rhat = rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_n_eff = n_eff.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_n_eff = n_eff.iter().sum::<f64>() / n_eff.len().max(1) as f64;

    let total_samples = draws.total_draws();
    let total_steps: usize = draws.chains.iter().map(|c| c.sampling_steps()).sum();
    let sampling_seconds: f64 = draws.chains.iter().map(|c| c.sampling_seconds).sum();
    let samples_per_neff = total_samples as f64 / min_n_eff;
    let steps_per_sample = total_steps as f64 / total_samples as f64;
    let seconds_per_step = if total_steps > 0 { sampling_seconds / total_steps as f64 } else { f64::NAN };
    Ok(Diagnostics {
        rhat,
        n_eff,
        max_rhat,
        min_n_eff,
        mean_n_eff,
        divergences: draws.divergences(),
        total_samples,
        total_steps,
        sampling_seconds,
        warmup_steps: draws.chains.iter().map(|c| c.warmup_steps).sum(),
        warmup_seconds: draws.chains.iter().map(|c| c.warmup_seconds).sum(),
        samples_per_neff,
        steps_per_sample,
        seconds_per_step,
        seconds_per_neff: samples_per_neff * steps_per_sample * seconds_per_step,
    })
}

fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let half = chains[0].len() / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[c.len() - half..].to_vec()])
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let mu = mean(x);
    x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Classic potential scale reduction on already-split chains.
fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_var(c)).collect::<Vec<_>>());
    let b_over_n = sample_var(&means);
    let var_plus = (n - 1.0) / n * w + b_over_n;
    if w <= 0.0 {
        return if var_plus <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    (var_plus / w).sqrt()
}

/// Replaces pooled values by normal scores of their (average) ranks.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.concat();
    let s = pooled.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    let z: Vec<f64> = ranks.iter().map(|r| norm_quantile((r - 0.375) / (s as f64 + 0.25))).collect();
    let n = chains[0].len();
    z.chunks(n).map(|c| c.to_vec()).collect()
}

/// Rank-normalized split R-hat: the larger of the bulk and tail versions.
pub fn rank_normalized_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves = split(chains);
    let bulk = basic_rhat(&rank_normalize(&halves));
    let mut pooled = halves.concat();
    pooled.sort_by(f64::total_cmp);
    let s = pooled.len();
    let median = if s % 2 == 1 { pooled[s / 2] } else { 0.5 * (pooled[s / 2 - 1] + pooled[s / 2]) };
    let folded: Vec<Vec<f64>> =
        halves.iter().map(|c| c.iter().map(|v| (v - median).abs()).collect()).collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    bulk.max(tail)
}

/// Effective sample size of equal-length chains.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    // biased autocovariance at lag t, averaged over chains
    let acov_mean = |t: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| (0..n - t).map(|i| (c[i] - mu) * (c[i + t] - mu)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let acov0 = acov_mean(0);
    let mean_var = acov0 * n as f64 / (n as f64 - 1.0);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    if !(var_plus > 0.0) {
        return total;
    }
    let rho_at = |t: usize| 1.0 - (mean_var - acov_mean(t)) / var_plus;

    let mut rho = vec![0.0; n + 1];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = rho_at(1);
    rho[1] = rho_odd;
    let mut s = 1;
    while s + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho_at(s + 1);
        rho_odd = rho_at(s + 2);
        if rho_even + rho_odd >= 0.0 {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_even > 0.0 {
        rho[max_s + 1] = rho_even;
    }
    // initial monotone sequence
    let mut t = 1;
    while t + 3 <= max_s {
        let prev = rho[t - 1] + rho[t];
        if rho[t + 1] + rho[t + 2] > prev {
            rho[t + 1] = prev / 2.0;
            rho[t + 2] = rho[t + 1];
        }
        t += 2;
    }
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    let tau = tau.max(1.0 / total.log10());
    (total / tau).min(total * total.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn iid(chains: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
    }

    #[test]
    fn iid_draws_have_rhat_near_one() {
        let c = iid(4, 1000, 1);
        let r = rank_normalized_rhat(&c);
        assert!((r - 1.0).abs() < 0.01, "{r}");
        let e = effective_sample_size(&split(&c));
        assert!(e > 3000.0 && e < 5000.0, "{e}");
    }

    #[test]
    fn shifted_chain_inflates_rhat() {
        let mut c = iid(4, 500, 2);
        c[0].iter_mut().for_each(|v| *v += 3.0);
        assert!(rank_normalized_rhat(&c) > 1.1);
    }

    #[test]
    fn constant_draws() {
        let c = vec![vec![2.0; 50]; 3];
        assert_eq!(rank_normalized_rhat(&c), 1.0);
        assert_eq!(effective_sample_size(&c), 150.0);
    }
}
