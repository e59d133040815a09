//! Discriminant distributions and the reference families they approximate.
//!
//! A discriminant distribution is the law of `g(X)`, the Bayes posterior
//! probability of class membership when a Bernoulli(`phi`) class label emits a
//! normally distributed signal `X`. With equal class variances the family is
//! described by two numbers, the positive-class fraction `phi` and the
//! standardized separation `delta`; every quantity here is evaluated in the
//! canonical representation where the negative class emits `N(0, 1)` and the
//! positive class emits `N(delta, 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{check_unit, Error, Result};
use crate::special::{
    ln_beta_fn, ln_logistic, ln_norm_cdf_sf, ln_norm_pdf, ln_norm_sf, log_sum_exp, logistic,
    logit, norm_cdf,
};

/// Homoskedastic discriminant distribution `disc(phi, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscParams {
    phi: f64,
    delta: f64,
}

impl DiscParams {
    pub fn new(phi: f64, delta: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::InvalidParameter(format!("phi must lie in (0, 1), got {phi}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { phi, delta })
    }

    /// Builds the distribution from `logit(phi)` and `delta` directly, which is
    /// how the threshold models parameterize it. `ln(1 - phi)` and `ln(phi)`
    /// stay accurate even when `phi` rounds to 0 or 1.
    pub(crate) fn from_logit(logit_phi: f64, delta: f64) -> Self {
        Self { phi: logistic(logit_phi), delta }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Signal-space to probability-space map.
    pub fn g(&self, x: f64) -> f64 {
        logistic(self.logit_g(x))
    }

    /// `logit(g(x))`, which is affine in the signal.
    pub fn logit_g(&self, x: f64) -> f64 {
        logit(self.phi) + self.delta * (x - 0.5 * self.delta)
    }

    /// Signal value mapped to probability `t`.
    pub fn g_inv(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        Ok(self.signal_threshold(logit(t)))
    }

    pub(crate) fn signal_threshold(&self, logit_t: f64) -> f64 {
        (logit_t - logit(self.phi)) / self.delta + 0.5 * self.delta
    }

    /// Log-space pieces of the two-component mixture split at signal `x`.
    pub fn tail_terms(&self, x: f64) -> TailTerms {
        let ln_phi = self.phi.ln();
        let ln_one_minus_phi = (-self.phi).ln_1p();
        let (neg_cdf, neg_sf) = ln_norm_cdf_sf(x);
        let (pos_cdf, pos_sf) = ln_norm_cdf_sf(x - self.delta);
        TailTerms {
            neg_above: ln_one_minus_phi + neg_sf,
            pos_above: ln_phi + pos_sf,
            neg_below: ln_one_minus_phi + neg_cdf,
            pos_below: ln_phi + pos_cdf,
        }
    }

    /// `P(P > t)`.
    pub fn ccdf(&self, t: f64) -> Result<f64> {
        let x = self.g_inv(t)?;
        Ok(self.tail_terms(x).ln_ccdf().exp())
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        let x = self.g_inv(t)?;
        Ok(self.tail_terms(x).ln_cdf().exp())
    }

    /// `E[P | P > t]`.
    pub fn conditional_mean(&self, t: f64) -> Result<f64> {
        let x = self.g_inv(t)?;
        Ok(self.tail_terms(x).ln_conditional_mean().exp())
    }

    /// Density of `P` on (0, 1).
    pub fn pdf(&self, t: f64) -> Result<f64> {
        Ok(self.ln_pdf(t)?.exp())
    }

    pub fn ln_pdf(&self, t: f64) -> Result<f64> {
        let x = self.g_inv(t)?;
        Ok(self.ln_signal_density(x) - self.delta.ln() - t.ln() - (-t).ln_1p())
    }

    /// Log density of the signal mixture `(1 - phi) N(0, 1) + phi N(delta, 1)`.
    pub fn ln_signal_density(&self, x: f64) -> f64 {
        log_sum_exp(
            (-self.phi).ln_1p() + ln_norm_pdf(x),
            self.phi.ln() + ln_norm_pdf(x - self.delta),
        )
    }

    /// Area under the ROC curve of the calibrated score.
    pub fn auc(&self) -> f64 {
        norm_cdf(self.delta * std::f64::consts::FRAC_1_SQRT_2)
    }

    /// Draws `(label, signal)` from the generative process.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, f64) {
        let positive = rng.random::<f64>() < self.phi;
        let z: f64 = rng.sample(StandardNormal);
        let x = if positive { z + self.delta } else { z };
        (positive, x)
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (_, x) = self.sample_labeled(rng);
        self.g(x)
    }

    /// `n` reproducible draws of `P`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_one(&mut rng)).collect()
    }
}

/// The mixture mass above and below a signal threshold, per class, in logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerms {
    pub neg_above: f64,
    pub pos_above: f64,
    pub neg_below: f64,
    pub pos_below: f64,
}

impl TailTerms {
    pub fn ln_ccdf(&self) -> f64 {
        log_sum_exp(self.neg_above, self.pos_above)
    }

    pub fn ln_cdf(&self) -> f64 {
        log_sum_exp(self.neg_below, self.pos_below)
    }

    pub fn ln_conditional_mean(&self) -> f64 {
        ln_logistic(self.pos_above - self.neg_above)
    }

    pub fn ln_one_minus_conditional_mean(&self) -> f64 {
        ln_logistic(self.neg_above - self.pos_above)
    }
}

/// Five-parameter discriminant distribution with class-specific signal laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralDiscParams {
    pub phi: f64,
    pub mu0: f64,
    pub sigma0: f64,
    pub mu1: f64,
    pub sigma1: f64,
}

impl GeneralDiscParams {
    pub fn new(phi: f64, mu0: f64, sigma0: f64, mu1: f64, sigma1: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < 1.0) {
            return Err(Error::InvalidParameter(format!("phi must lie in (0, 1), got {phi}")));
        }
        if !(sigma0 > 0.0 && sigma1 > 0.0) {
            return Err(Error::InvalidParameter("signal scales must be positive".into()));
        }
        if !(mu1 > mu0) {
            return Err(Error::InvalidParameter(format!("need mu1 > mu0, got {mu1} <= {mu0}")));
        }
        Ok(Self { phi, mu0, sigma0, mu1, sigma1 })
    }

    pub fn is_homoskedastic(&self) -> bool {
        (self.sigma0 - self.sigma1).abs() <= 1e-12 * self.sigma0.max(self.sigma1)
    }

    /// `P(Y = 1 | X = x)` by Bayes' rule.
    pub fn posterior_probability(&self, x: f64) -> f64 {
        let ln_neg = ln_norm_pdf((x - self.mu0) / self.sigma0) - self.sigma0.ln();
        let ln_pos = ln_norm_pdf((x - self.mu1) / self.sigma1) - self.sigma1.ln();
        logistic(logit(self.phi) + ln_pos - ln_neg)
    }

    pub fn canonicalize(&self) -> Result<DiscParams> {
        if !self.is_homoskedastic() {
            return Err(Error::Heteroskedastic { sigma0: self.sigma0, sigma1: self.sigma1 });
        }
        DiscParams::new(self.phi, (self.mu1 - self.mu0) / self.sigma0)
    }

    /// `P(g(X) > t)` evaluated in this representation's own signal space.
    pub fn ccdf(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if !self.is_homoskedastic() {
            return Err(Error::Heteroskedastic { sigma0: self.sigma0, sigma1: self.sigma1 });
        }
        let s2 = self.sigma0 * self.sigma0;
        let gap = self.mu1 - self.mu0;
        // logit g(x) = logit(phi) + gap * (2x - mu0 - mu1) / (2 s2)
        let x = (logit(t) - logit(self.phi)) * s2 / gap + 0.5 * (self.mu0 + self.mu1);
        let neg = (-self.phi).ln_1p() + ln_norm_sf((x - self.mu0) / self.sigma0);
        let pos = self.phi.ln() + ln_norm_sf((x - self.mu1) / self.sigma1);
        Ok(log_sum_exp(neg, pos).exp())
    }
}

/// Reference families on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefDist {
    /// Beta with mean `phi` and total count `lambda`.
    Beta { phi: f64, lambda: f64 },
    /// `logistic(N(mu, sigma))`.
    LogitNormal { mu: f64, sigma: f64 },
}

impl RefDist {
    pub fn beta(phi: f64, lambda: f64) -> Result<Self> {
        let d = RefDist::Beta { phi, lambda };
        d.validate()?;
        Ok(d)
    }

    pub fn logit_normal(mu: f64, sigma: f64) -> Result<Self> {
        let d = RefDist::LogitNormal { mu, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RefDist::Beta { phi, lambda } => {
                if !(phi > 0.0 && phi < 1.0 && lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "beta needs 0 < phi < 1 and lambda > 0, got ({phi}, {lambda})"
                    )));
                }
            }
            RefDist::LogitNormal { mu, sigma } => {
                if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "logit-normal needs sigma > 0, got ({mu}, {sigma})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Standard `(alpha, beta)` shapes for the beta family.
    pub fn beta_shapes(&self) -> Option<(f64, f64)> {
        match *self {
            RefDist::Beta { phi, lambda } => Some((phi * lambda, (1.0 - phi) * lambda)),
            RefDist::LogitNormal { .. } => None,
        }
    }

    pub fn ln_pdf(&self, t: f64) -> Result<f64> {
        self.validate()?;
        check_unit(t)?;
        Ok(match *self {
            RefDist::Beta { .. } => {
                let (a, b) = self.beta_shapes().unwrap();
                (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - ln_beta_fn(a, b)
            }
            RefDist::LogitNormal { mu, sigma } => {
                let z = (logit(t) - mu) / sigma;
                ln_norm_pdf(z) - sigma.ln() - t.ln() - (-t).ln_1p()
            }
        })
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        Ok(self.ln_pdf(t)?.exp())
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        self.validate()?;
        check_unit(t)?;
        Ok(match *self {
            RefDist::Beta { .. } => {
                let (a, b) = self.beta_shapes().unwrap();
                beta_reg(a, b, t)
            }
            RefDist::LogitNormal { mu, sigma } => norm_cdf((logit(t) - mu) / sigma),
        })
    }
}
