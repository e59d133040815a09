//! Moving random initial points toward the bulk of the posterior with a
//! bounded number of L-BFGS iterations.

use std::cell::RefCell;

use argmin::core::{CostFunction, Error as ArgminError, Executor, Gradient};
use argmin::solver::linesearch::condition::ArmijoCondition;
use argmin::solver::linesearch::BacktrackingLineSearch;
use argmin::solver::quasinewton::LBFGS;

use crate::sampler::LogDensity;

struct NegLogDensity<'a, T: ?Sized> {
    target: &'a T,
    evals: RefCell<usize>,
    best: RefCell<(f64, Vec<f64>)>,
}

impl<T: LogDensity + ?Sized> NegLogDensity<'_, T> {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        *self.evals.borrow_mut() += 1;
        let mut grad = vec![0.0; x.len()];
        let lp = self.target.log_density_grad(x, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            let mut best = self.best.borrow_mut();
            if lp > best.0 {
                *best = (lp, x.to_vec());
            }
        }
        (-lp, grad.iter().map(|g| -g).collect())
    }
}

impl<T: LogDensity + ?Sized> CostFunction for NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, ArgminError> {
        // a huge finite cost makes the line search back off instead of failing
        let (v, _) = self.eval(x);
        Ok(if v.is_finite() { v } else { f64::MAX })
    }
}

impl<T: LogDensity + ?Sized> Gradient for NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> Result<Vec<f64>, ArgminError> {
        let g = self.eval(x).1;
        Ok(if g.iter().all(|v| v.is_finite()) { g } else { vec![0.0; g.len()] })
    }
}

/// Runs up to `iters` L-BFGS iterations on `-log p` from `start` and returns
/// the best finite point visited along with the number of density
/// evaluations. Solver failures simply end the search early.
pub(crate) fn optimize_start<T: LogDensity + ?Sized>(target: &T, start: Vec<f64>, iters: usize) -> (Vec<f64>, usize) {
    let problem = NegLogDensity {
        target,
        evals: RefCell::new(0),
        best: RefCell::new((f64::NEG_INFINITY, start.clone())),
    };
    let Ok(condition) = ArmijoCondition::new(1e-4) else {
        return (start, 0);
    };
    let Ok(line_search) = BacktrackingLineSearch::new(condition).rho(0.5) else {
        return (start, 0);
    };
    let solver = LBFGS::new(line_search, 7);
    let outcome = Executor::new(&problem, solver)
        .configure(|s| s.param(start).max_iters(iters as u64))
        .run();
    if let Err(e) = &outcome {
        log::debug!("initial optimization stopped early: {e}");
    }
    let evals = *problem.evals.borrow();
    let (_, best) = problem.best.into_inner();
    (best, evals)
}

impl<T: LogDensity + ?Sized> CostFunction for &NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> Result<f64, ArgminError> {
        (*self).cost(x)
    }
}

impl<T: LogDensity + ?Sized> Gradient for &NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> Result<Vec<f64>, ArgminError> {
        (*self).gradient(x)
    }
}
