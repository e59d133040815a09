//! Per-cell tail masses and their derivatives with respect to
//! `(logit phi, ln delta, logit t)`.

use crate::special::{ln_logistic, ln_norm_cdf_sf, ln_norm_pdf, log_sum_exp, logistic, softplus};

pub(crate) type Grad3 = [f64; 3];

/// Log masses of the negative / positive class above and below the signal
/// threshold, with gradients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellEval {
    pub neg_above: f64,
    pub pos_above: f64,
    pub neg_below: f64,
    pub pos_below: f64,
    pub d_neg_above: Grad3,
    pub d_pos_above: Grad3,
    pub d_neg_below: Grad3,
    pub d_pos_below: Grad3,
}

impl CellEval {
    pub fn new(logit_phi: f64, ln_delta: f64, logit_t: f64) -> Self {
        let delta = ln_delta.exp();
        let phi = logistic(logit_phi);
        let gap = (logit_t - logit_phi) / delta;
        let x = gap + 0.5 * delta;
        let y = gap - 0.5 * delta;
        let dx = [-1.0 / delta, -gap + 0.5 * delta, 1.0 / delta];
        let dy = [-1.0 / delta, -gap - 0.5 * delta, 1.0 / delta];

        let ln_neg = -softplus(logit_phi);
        let ln_pos = -softplus(-logit_phi);
        let (x_cdf, x_sf) = ln_norm_cdf_sf(x);
        let (y_cdf, y_sf) = ln_norm_cdf_sf(y);
        let (x_pdf, y_pdf) = (ln_norm_pdf(x), ln_norm_pdf(y));
        // hazard-type ratios pdf/sf and pdf/cdf
        let (mx_sf, mx_cdf) = ((x_pdf - x_sf).exp(), (x_pdf - x_cdf).exp());
        let (my_sf, my_cdf) = ((y_pdf - y_sf).exp(), (y_pdf - y_cdf).exp());

        let combine = |base: f64, slope: f64, dz: &Grad3| -> Grad3 {
            [base + slope * dz[0], slope * dz[1], slope * dz[2]]
        };
        Self {
            neg_above: ln_neg + x_sf,
            pos_above: ln_pos + y_sf,
            neg_below: ln_neg + x_cdf,
            pos_below: ln_pos + y_cdf,
            d_neg_above: combine(-phi, -mx_sf, &dx),
            d_pos_above: combine(1.0 - phi, -my_sf, &dy),
            d_neg_below: combine(-phi, mx_cdf, &dx),
            d_pos_below: combine(1.0 - phi, my_cdf, &dy),
        }
    }

    pub fn ln_ccdf(&self) -> f64 {
        log_sum_exp(self.neg_above, self.pos_above)
    }

    pub fn ln_hit_rate(&self) -> f64 {
        ln_logistic(self.pos_above - self.neg_above)
    }

    /// `ln P(P > t)` and its gradient.
    pub fn ln_ccdf_grad(&self) -> (f64, Grad3) {
        mix(self.neg_above, self.pos_above, &self.d_neg_above, &self.d_pos_above)
    }

    /// `ln P(P <= t)` and its gradient.
    pub fn ln_cdf_grad(&self) -> (f64, Grad3) {
        mix(self.neg_below, self.pos_below, &self.d_neg_below, &self.d_pos_below)
    }
}

fn mix(a: f64, b: f64, da: &Grad3, db: &Grad3) -> (f64, Grad3) {
    let total = log_sum_exp(a, b);
    let wa = (a - total).exp();
    let wb = (b - total).exp();
    (total, [0, 1, 2].map(|i| wa * da[i] + wb * db[i]))
}
