//! Reference implementations and fixtures used only by tests. The oracles
//! share no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use fastthresh::model::{CellCounts, Layout, ModelParams, PrecinctStopData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    // split into panels first so narrow features are not skipped
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// `P(Y = 1 | X = x)` for the homoskedastic model with `mu0 = 0`, `sigma = 1`.
pub fn bayes_g(x: f64, phi: f64, delta: f64) -> f64 {
    // the log-odds form stays finite where both class densities underflow
    let lo = phi.ln() - (1.0 - phi).ln() + delta * x - 0.5 * delta * delta;
    1.0 / (1.0 + (-lo).exp())
}

/// Signal at which the Bayes posterior crosses `t`, by bisection.
pub fn bayes_threshold(t: f64, phi: f64, delta: f64) -> f64 {
    let (mut lo, mut hi) = (-200.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // compare in log-odds to stay accurate where g saturates
        let lo_odds = phi.ln() - (1.0 - phi).ln() + delta * mid - 0.5 * delta * delta;
        if lo_odds < (t / (1.0 - t)).ln() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn mixture(x: f64, phi: f64, delta: f64) -> f64 {
    (1.0 - phi) * normal_pdf(x) + phi * normal_pdf(x - delta)
}

/// `P(P > t)` by integrating the signal mixture above the crossing point.
pub fn oracle_ccdf(t: f64, phi: f64, delta: f64) -> f64 {
    let x = bayes_threshold(t, phi, delta);
    let top = x.max(delta) + 14.0;
    let bottom = x.max(-14.0);
    if bottom >= top {
        return 0.0;
    }
    simpson(&|s| mixture(s, phi, delta), bottom, top, 1e-14)
}

fn ln_mixture(x: f64, phi: f64, delta: f64) -> f64 {
    let a = (1.0 - phi).ln() - 0.5 * x * x;
    let b = phi.ln() - 0.5 * (x - delta) * (x - delta);
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln() - 0.5 * (2.0 * PI).ln()
}

/// `E[P | P > t]` by integrating `g(x)` against the mixture, rescaled by its
/// largest value on the range so that far tails do not underflow.
pub fn oracle_conditional_mean(t: f64, phi: f64, delta: f64) -> f64 {
    let x = bayes_threshold(t, phi, delta);
    let top = x.max(delta) + 14.0;
    let bottom = x.max(-14.0);
    let base = (0..=400)
        .map(|i| ln_mixture(bottom + (top - bottom) * i as f64 / 400.0, phi, delta))
        .fold(f64::NEG_INFINITY, f64::max);
    let w = |s: f64| (ln_mixture(s, phi, delta) - base).exp();
    let num = simpson(&|s| bayes_g(s, phi, delta) * w(s), bottom, top, 1e-13);
    let den = simpson(&w, bottom, top, 1e-13);
    num / den
}

/// `E[P | P <= t]`.
pub fn oracle_lower_mean(t: f64, phi: f64, delta: f64) -> f64 {
    let x = bayes_threshold(t, phi, delta);
    let bottom = x.min(0.0) - 14.0;
    let top = x.min(delta + 14.0);
    let num = simpson(&|s| bayes_g(s, phi, delta) * mixture(s, phi, delta), bottom, top, 1e-15);
    let den = simpson(&|s| mixture(s, phi, delta), bottom, top, 1e-15);
    num / den
}

/// Lanczos approximation (g = 7, n = 9) of `ln Gamma(x)` for `x > 0`.
pub fn lanczos_ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - lanczos_ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn binomial_ln_pmf(n: u64, k: u64, p: f64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

pub fn multinomial_ln_pmf(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut v = ln_factorial(n);
    for (&k, &p) in counts.iter().zip(probs) {
        v -= ln_factorial(k);
        if k > 0 {
            v += k as f64 * p.ln();
        }
    }
    v
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn random_params(layout: Layout, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |a: f64, b: f64| rng.random_range(a..b);
    let r = layout.races;
    let mut p = ModelParams::from_race_effects(
        layout,
        (0..r).map(|_| u(-2.5, 0.5)).collect(),
        (0..r).map(|_| u(-0.5, 0.8)).collect(),
        (0..r).map(|_| u(-3.0, -1.0)).collect(),
    )
    .unwrap();
    for d in 1..layout.locations {
        p.phi_loc[d] = u(-0.4, 0.4);
        p.lambda_loc[d] = u(-0.3, 0.3);
    }
    p.sigma_phi = u(0.1, 0.5);
    p.sigma_lambda = u(0.1, 0.5);
    for t in p.logit_threshold.iter_mut() {
        *t += u(-0.8, 0.8);
    }
    p
}

pub fn frisk_cells(layout: Layout, seed: u64) -> Vec<CellCounts> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for r in 0..layout.races {
        for d in 0..layout.locations {
            let stops = rng.random_range(1..400u64);
            let searches = rng.random_range(0..=stops);
            let hits = rng.random_range(0..=searches);
            out.push(CellCounts { race: r, location: d, stops, searches, hits });
        }
    }
    out
}

pub fn stop_data(layout: Layout, seed: u64) -> Vec<PrecinctStopData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..layout.locations)
        .map(|d| {
            let stops: Vec<u64> = (0..layout.races).map(|_| rng.random_range(0..300u64)).collect();
            let hits = stops.iter().map(|&s| rng.random_range(0..=s)).collect();
            let census: Vec<f64> = (0..layout.races).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = census.iter().sum();
            PrecinctStopData { location: d, stops, hits, census: census.iter().map(|c| c / total).collect() }
        })
        .collect()
}

/// Central differences with one Richardson step. Components where both the
/// analytic and numeric values are below 1e-8 in magnitude are skipped.
pub fn fd_check(f: &dyn Fn(&[f64], &mut [f64]) -> f64, theta: &[f64], rel_tol: f64) -> Result<(), String> {
    let n = theta.len();
    let mut grad = vec![0.0; n];
    f(theta, &mut grad);
    let mut scratch = vec![0.0; n];
    let mut central = |i: usize, h: f64| {
        let mut hi = theta.to_vec();
        let mut lo = theta.to_vec();
        hi[i] += h;
        lo[i] -= h;
        (f(&hi, &mut scratch) - f(&lo, &mut scratch)) / (2.0 * h)
    };
    for i in 0..n {
        let h = 1e-3 * (1.0 + theta[i].abs());
        let fd = (4.0 * central(i, 0.5 * h) - central(i, h)) / 3.0;
        if grad[i].abs() < 1e-8 && fd.abs() < 1e-8 {
            continue;
        }
        let rel = (fd - grad[i]).abs() / grad[i].abs().max(fd.abs());
        if rel > rel_tol {
            return Err(format!("coord {i}: analytic {} vs fd {fd} (rel {rel:.2e})", grad[i]));
        }
    }
    Ok(())
}
