//! Multinomial NUTS transition with the generalized no-U-turn criterion.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::sampler::LogDensity;
use crate::special::log_sum_exp;

/// Energy error beyond which a trajectory is declared divergent.
const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub log_density: f64,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let log_density = target.log_density_grad(&q, &mut grad);
        let p = vec![0.0; q.len()];
        Self { q, p, grad, log_density }
    }
}

/// Euclidean Hamiltonian with a diagonal inverse metric.
pub struct Hamiltonian<'a, T: ?Sized> {
    target: &'a T,
    inv_metric: Vec<f64>,
    momentum_scale: Vec<f64>,
}

impl<'a, T: LogDensity + ?Sized> Hamiltonian<'a, T> {
    pub fn new(target: &'a T, inv_metric: Vec<f64>) -> Self {
        let momentum_scale = inv_metric.iter().map(|m| 1.0 / m.sqrt()).collect();
        Self { target, inv_metric, momentum_scale }
    }

    pub fn inv_metric(&self) -> &[f64] {
        &self.inv_metric
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    pub fn energy(&self, z: &PhasePoint) -> f64 {
        let h = -z.log_density + self.kinetic(&z.p);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    pub fn sample_momentum<R: Rng + ?Sized>(&self, z: &mut PhasePoint, rng: &mut R) {
        for (p, s) in z.p.iter_mut().zip(&self.momentum_scale) {
            *p = rng.sample::<f64, _>(StandardNormal) * s;
        }
    }

    fn velocity(&self, p: &[f64], out: &mut [f64]) {
        for ((o, p), m) in out.iter_mut().zip(p).zip(&self.inv_metric) {
            *o = p * m;
        }
    }

    /// One leapfrog step of signed size `eps`; costs one gradient evaluation.
    pub fn leapfrog(&self, z: &mut PhasePoint, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.log_density = self.target.log_density_grad(&z.q, &mut z.grad);
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    /// Doubles or halves `eps` until a single step's acceptance probability
    /// crosses 0.8. Gradient evaluations are added to `steps`.
    pub fn find_reasonable_step<R: Rng + ?Sized>(
        &self,
        start: &PhasePoint,
        mut eps: f64,
        rng: &mut R,
        steps: &mut usize,
    ) -> f64 {
        let threshold = 0.8f64.ln();
        let mut direction = 0i32;
        for _ in 0..100 {
            let mut z = start.clone();
            self.sample_momentum(&mut z, rng);
            let h0 = self.energy(&z);
            self.leapfrog(&mut z, eps);
            *steps += 1;
            let delta = h0 - self.energy(&z);
            let up = delta > threshold;
            if direction == 0 {
                direction = if up { 1 } else { -1 };
            } else if (direction == 1) != up {
                break;
            }
            let next = if direction == 1 { 2.0 * eps } else { 0.5 * eps };
            if !(next > 1e-12 && next < 1e7) {
                break;
            }
            eps = next;
        }
        eps
    }
}

/// Result of one NUTS transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub point: PhasePoint,
    pub depth: usize,
    pub n_steps: usize,
    pub divergent: bool,
    pub accept_stat: f64,
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    let dot = |a: &[f64]| a.iter().zip(rho).map(|(x, y)| x * y).sum::<f64>();
    dot(p_sharp_plus) > 0.0 && dot(p_sharp_minus) > 0.0
}

fn sum_into(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Momentum and velocity at both ends of a subtree, plus its momentum sum.
#[derive(Clone)]
struct Span {
    p_near: Vec<f64>,
    sharp_near: Vec<f64>,
    p_far: Vec<f64>,
    sharp_far: Vec<f64>,
    rho: Vec<f64>,
}

struct Builder<'h, 'a, T: ?Sized, R> {
    ham: &'h Hamiltonian<'a, T>,
    rng: &'h mut R,
    h0: f64,
    eps: f64,
    n_steps: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<T: LogDensity + ?Sized, R: Rng> Builder<'_, '_, T, R> {
    /// Builds a subtree of `2^depth` states continuing from `z` in the
    /// direction of `self.eps`. Returns the span, the proposal and the log
    /// total weight, or `None` if the subtree diverged or made a U-turn.
    fn build(&mut self, depth: usize, z: &mut PhasePoint) -> Option<(Span, PhasePoint, f64)> {
        if depth == 0 {
            self.ham.leapfrog(z, self.eps);
            self.n_steps += 1;
            let h = self.ham.energy(z);
            if h - self.h0 > MAX_ENERGY_ERROR {
                self.divergent = true;
                return None;
            }
            let log_w = self.h0 - h;
            self.sum_metro_prob += if log_w > 0.0 { 1.0 } else { log_w.exp() };
            let mut sharp = vec![0.0; z.p.len()];
            self.ham.velocity(&z.p, &mut sharp);
            let span = Span {
                p_near: z.p.clone(),
                sharp_near: sharp.clone(),
                p_far: z.p.clone(),
                sharp_far: sharp,
                rho: z.p.clone(),
            };
            return Some((span, z.clone(), log_w));
        }

        let (first, mut propose, w_first) = self.build(depth - 1, z)?;
        let (second, propose_second, w_second) = self.build(depth - 1, z)?;
        let w_total = log_sum_exp(w_first, w_second);
        if w_second > w_total || self.rng.random::<f64>() < (w_second - w_total).exp() {
            propose = propose_second;
        }

        let rho = sum_into(&first.rho, &second.rho);
        let mut persist = no_u_turn(&first.sharp_near, &second.sharp_far, &rho);
        // merged-subtree checks catch U-turns that straddle the join
        let rho_ext = sum_into(&first.rho, &second.p_near);
        persist &= no_u_turn(&first.sharp_near, &second.sharp_near, &rho_ext);
        let rho_ext = sum_into(&second.rho, &first.p_far);
        persist &= no_u_turn(&first.sharp_far, &second.sharp_far, &rho_ext);
        if !persist {
            return None;
        }
        let span = Span {
            p_near: first.p_near,
            sharp_near: first.sharp_near,
            p_far: second.p_far,
            sharp_far: second.sharp_far,
            rho,
        };
        Some((span, propose, w_total))
    }
}

/// One NUTS transition from `start` with step size `eps`.
pub fn transition<T: LogDensity + ?Sized, R: Rng>(
    ham: &Hamiltonian<'_, T>,
    start: &PhasePoint,
    eps: f64,
    max_depth: usize,
    rng: &mut R,
) -> Transition {
    let mut z0 = start.clone();
    ham.sample_momentum(&mut z0, rng);
    let h0 = ham.energy(&z0);
    let dim = z0.q.len();

    let mut sharp0 = vec![0.0; dim];
    ham.velocity(&z0.p, &mut sharp0);
    // ends of the full trajectory: backward-most and forward-most states
    let mut bck = (z0.clone(), z0.p.clone(), sharp0.clone());
    let mut fwd = (z0.clone(), z0.p.clone(), sharp0);
    let mut rho = z0.p.clone();
    let mut sample = z0;
    let mut log_w = 0.0;

    let mut b = Builder { ham, rng, h0, eps, n_steps: 0, sum_metro_prob: 0.0, divergent: false };
    let mut depth = 0;
    while depth < max_depth {
        let forward = b.rng.random::<f64>() > 0.5;
        b.eps = if forward { eps.abs() } else { -eps.abs() };
        let end = if forward { &mut fwd } else { &mut bck };
        let Some((span, propose, w_sub)) = b.build(depth, &mut end.0) else {
            break;
        };
        depth += 1;
        if w_sub > log_w || b.rng.random::<f64>() < (w_sub - log_w).exp() {
            sample = propose;
        }
        log_w = log_sum_exp(log_w, w_sub);

        // old trajectory end adjacent to the new subtree, and the far end
        let (old_adj_p, old_adj_sharp, other_sharp) = if forward {
            (fwd.1.clone(), fwd.2.clone(), bck.2.clone())
        } else {
            (bck.1.clone(), bck.2.clone(), fwd.2.clone())
        };
        let old_rho = rho.clone();
        rho = sum_into(&old_rho, &span.rho);
        let mut persist = no_u_turn(&other_sharp, &span.sharp_far, &rho);
        let rho_ext = sum_into(&old_rho, &span.p_near);
        persist &= no_u_turn(&other_sharp, &span.sharp_near, &rho_ext);
        let rho_ext = sum_into(&span.rho, &old_adj_p);
        persist &= no_u_turn(&old_adj_sharp, &span.sharp_far, &rho_ext);

        let end = if forward { &mut fwd } else { &mut bck };
        end.1 = span.p_far;
        end.2 = span.sharp_far;
        if !persist {
            break;
        }
    }
    let accept_stat = if b.n_steps > 0 { b.sum_metro_prob / b.n_steps as f64 } else { 0.0 };
    let mut point = sample;
    point.p.fill(0.0);
    Transition { point, depth, n_steps: b.n_steps, divergent: b.divergent, accept_stat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Gauss;
    impl LogDensity for Gauss {
        fn dim(&self) -> usize {
            2
        }
        fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
            g[0] = -q[0];
            g[1] = -q[1] / 4.0;
            -0.5 * (q[0] * q[0] + q[1] * q[1] / 4.0)
        }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let ham = Hamiltonian::new(&Gauss, vec![1.0, 2.0]);
        let mut z = PhasePoint::new(&Gauss, vec![0.3, -1.2]);
        z.p = vec![0.7, 0.1];
        let start = z.clone();
        for _ in 0..10 {
            ham.leapfrog(&mut z, 0.1);
        }
        for _ in 0..10 {
            ham.leapfrog(&mut z, -0.1);
        }
        for (a, b) in z.q.iter().zip(&start.q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transition_accounts_for_steps() {
        let ham = Hamiltonian::new(&Gauss, vec![1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = PhasePoint::new(&Gauss, vec![0.5, 0.5]);
        let t = transition(&ham, &z, 0.3, 10, &mut rng);
        assert!(t.n_steps >= 1 && t.n_steps < (1 << t.depth.max(1)) + 1);
        assert!((0.0..=1.0).contains(&t.accept_stat));
        assert!(!t.divergent);
    }

    #[test]
    fn huge_step_diverges() {
        struct Steep;
        impl LogDensity for Steep {
            fn dim(&self) -> usize {
                1
            }
            fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
                g[0] = -4.0 * q[0].powi(3);
                -q[0].powi(4)
            }
        }
        let ham = Hamiltonian::new(&Steep, vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = PhasePoint::new(&Steep, vec![1.0]);
        let t = transition(&ham, &z, 5.0, 10, &mut rng);
        assert!(t.divergent);
    }
}
