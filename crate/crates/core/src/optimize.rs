//! Nelder-Mead simplex minimization.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Initial simplex edge length along each coordinate.
    pub step: f64,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ...and the simplex diameter falls below this.
    pub x_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 2000, step: 0.5, f_tol: 1e-9, x_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    cfg: &NelderMeadConfig,
) -> NelderMeadResult {
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start, &mut evals)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += cfg.step;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < cfg.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= cfg.f_tol && diameter <= cfg.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + coef * (w - c)).collect()
        };

        let reflected = along(-alpha);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = along(-gamma);
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < simplex[n].1 {
                let c = along(-rho);
                let fc = eval(&c, &mut evals);
                (c, fc)
            } else {
                let c = along(rho);
                let fc = eval(&c, &mut evals);
                (c, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best) {
                        *xi = bi + sigma * (*xi - bi);
                    }
                    *fx = eval(x, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult { x, fx, evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let cfg = NelderMeadConfig { max_evals: 5000, f_tol: 1e-14, x_tol: 1e-8, ..Default::default() };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &cfg);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn reports_budget_exhaustion() {
        let cfg = NelderMeadConfig { max_evals: 10, ..Default::default() };
        let r = nelder_mead(|x: &[f64]| x[0].abs() + x[1].abs(), &[50.0, -30.0], &cfg);
        assert!(!r.converged);
        assert!(r.evals >= 10);
    }

    #[test]
    fn nan_is_treated_as_worst() {
        let f = |x: &[f64]| if x[0] < -1.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let r = nelder_mead(f, &[0.0], &NelderMeadConfig::default());
        assert!((r.x[0] - 0.5).abs() < 1e-5);
    }
}
