//! Warmup adaptation: dual averaging of the step size and windowed
//! estimation of a diagonal metric.

pub(crate) struct DualAveraging {
    mu: f64,
    target: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(eps: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps).ln(),
            target,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        let accept = if accept_stat.is_finite() { accept_stat.min(1.0) } else { 0.0 };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    pub fn final_step_size(&self) -> f64 {
        if self.counter > 0.0 {
            self.x_bar.exp()
        } else {
            (self.mu.exp()) / 10.0
        }
    }
}

/// Running mean and variance per coordinate.
pub(crate) struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn variance(&self) -> Vec<f64> {
        let denom = (self.n.max(2) - 1) as f64;
        self.m2.iter().map(|s| s / denom).collect()
    }

    pub fn reset(&mut self) {
        self.n = 0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }
}

/// Metric-estimation windows inside warmup: an initial fast buffer, a run
/// of doubling slow windows, and a terminal fast buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmupSchedule {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window_end: usize,
    adapt_metric: bool,
}

impl WarmupSchedule {
    pub fn new(warmup: usize) -> Self {
        let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
        let adapt_metric = warmup >= 20;
        if adapt_metric && init + term + base > warmup {
            init = (0.15 * warmup as f64) as usize;
            term = (0.1 * warmup as f64) as usize;
            base = warmup - init - term;
        }
        Self {
            warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window_end: init + base - 1,
            adapt_metric,
        }
    }

    /// Whether the draw at warmup iteration `iter` feeds the metric estimate.
    pub fn in_window(&self, iter: usize) -> bool {
        self.adapt_metric && iter >= self.init_buffer && iter + self.term_buffer < self.warmup
    }

    pub fn is_window_end(&self, iter: usize) -> bool {
        self.adapt_metric && iter == self.next_window_end && iter < self.warmup
    }

    /// Moves to the next slow window after the one ending at `iter`.
    pub fn advance(&mut self, iter: usize) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_window_end == last {
            self.next_window_end = usize::MAX;
            return;
        }
        self.window_size *= 2;
        self.next_window_end = iter + self.window_size;
        if self.next_window_end != last && self.next_window_end + 2 * self.window_size > last {
            self.next_window_end = last;
        }
    }

    /// The iterations at which windows close, in order.
    pub fn window_ends(&self) -> Vec<usize> {
        let mut s = self.clone();
        let mut ends = Vec::new();
        for i in 0..self.warmup {
            if s.is_window_end(i) {
                ends.push(i);
                s.advance(i);
            }
        }
        ends
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_windows() {
        let s = WarmupSchedule::new(1000);
        assert_eq!(s.window_ends(), vec![99, 149, 249, 449, 949]);
        assert!(!s.in_window(74) && s.in_window(75) && s.in_window(949) && !s.in_window(950));
    }

    #[test]
    fn short_warmup_uses_proportional_buffers() {
        let s = WarmupSchedule::new(100);
        assert_eq!(s.window_ends(), vec![89]);
        assert!(WarmupSchedule::new(10).window_ends().is_empty());
    }

    #[test]
    fn dual_averaging_moves_towards_target() {
        let mut da = DualAveraging::new(1.0, 0.8);
        for _ in 0..50 {
            da.update(0.2);
        }
        let low = da.final_step_size();
        let mut da = DualAveraging::new(1.0, 0.8);
        for _ in 0..50 {
            da.update(0.99);
        }
        assert!(da.final_step_size() > low);
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 0.5];
        let mut w = Welford::new(1);
        for x in xs {
            w.add(&[x]);
        }
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((w.variance()[0] - var).abs() < 1e-12);
    }
}
