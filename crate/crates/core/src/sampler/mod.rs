//! No-U-Turn sampling with a diagonal metric, windowed warmup adaptation and
//! convergence diagnostics.

mod adapt;
pub mod diagnostics;
mod init;
pub mod nuts;

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adapt::WarmupSchedule;
pub use diagnostics::{diagnose, Diagnostics};
pub use nuts::{Hamiltonian, PhasePoint};

/// A differentiable log density on `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Returns the log density at `position` and writes its gradient.
    /// Non-finite values mark the point as outside the support.
    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> f64;

    fn log_density(&self, position: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.dim()];
        self.log_density_grad(position, &mut grad)
    }

    fn parameter_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("theta[{i}]")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub samples: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    /// Initial values are drawn uniformly from `(-init_radius, init_radius)`.
    pub init_radius: f64,
    /// L-BFGS iterations applied to each random initial point before warmup;
    /// 0 starts warmup from the random point itself. Keep this small: the
    /// joint density of a hierarchical model grows without bound as a scale
    /// parameter and its effects shrink to zero, and a chain started there
    /// adapts a tiny step size and stays.
    pub init_optimize_iters: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 5,
            warmup: 2500,
            samples: 2500,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 1,
            init_radius: 2.0,
            init_optimize_iters: 200,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.samples == 0 {
            return Err(Error::InvalidParameter("need at least one chain and one draw".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target_accept must lie in (0, 1)".into()));
        }
        if self.max_tree_depth == 0 || self.max_tree_depth > 30 {
            return Err(Error::InvalidParameter("max_tree_depth must lie in 1..=30".into()));
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return Err(Error::InvalidParameter("init_radius must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Row-major `samples x dim`.
    pub draws: Vec<f64>,
    pub log_density: Vec<f64>,
    pub divergent: Vec<bool>,
    pub tree_depth: Vec<usize>,
    pub n_steps: Vec<usize>,
    pub accept_stat: Vec<f64>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_steps: usize,
    pub warmup_seconds: f64,
    pub sampling_seconds: f64,
}

impl ChainDraws {
    /// Wraps externally produced draws with no timing information.
    pub fn from_draws(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!("every draw must have {dim} entries")));
        }
        let n = rows.len();
        Ok(Self {
            draws: rows.concat(),
            log_density: vec![f64::NAN; n],
            divergent: vec![false; n],
            tree_depth: vec![0; n],
            n_steps: vec![0; n],
            accept_stat: vec![f64::NAN; n],
            step_size: f64::NAN,
            inv_metric: vec![1.0; dim],
            warmup_steps: 0,
            warmup_seconds: 0.0,
            sampling_seconds: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.divergent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.divergent.is_empty()
    }

    pub fn sampling_steps(&self) -> usize {
        self.n_steps.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub dim: usize,
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn new(dim: usize, names: Vec<String>, chains: Vec<ChainDraws>) -> Result<Self> {
        if names.len() != dim {
            return Err(Error::DimensionMismatch("one name per parameter required".into()));
        }
        if chains.iter().any(|c| c.draws.len() != c.len() * dim) {
            return Err(Error::DimensionMismatch("chain draws do not match dimension".into()));
        }
        Ok(Self { dim, names, chains })
    }

    /// Convenience constructor from `chains x draws x dim` nested vectors.
    pub fn from_nested(chains: &[Vec<Vec<f64>>]) -> Result<Self> {
        let dim = chains.first().and_then(|c| c.first()).map_or(0, |d| d.len());
        let built = chains.iter().map(|c| ChainDraws::from_draws(dim, c)).collect::<Result<Vec<_>>>()?;
        Self::new(dim, (0..dim).map(|i| format!("theta[{i}]")).collect(), built)
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.len()).sum()
    }

    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        &self.chains[chain].draws[iter * self.dim..(iter + 1) * self.dim]
    }

    /// Every draw of every chain, chain by chain.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.chains.iter().flat_map(move |c| c.draws.chunks_exact(self.dim.max(1)))
    }

    pub fn trace(&self, chain: usize, param: usize) -> Vec<f64> {
        let c = &self.chains[chain];
        (0..c.len()).map(|i| c.draws[i * self.dim + param]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        let n = self.total_draws() as f64;
        for d in self.iter_draws() {
            for (mi, v) in m.iter_mut().zip(d) {
                *mi += v / n;
            }
        }
        m
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergent.iter().filter(|d| **d).count()).sum()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self).map_err(|e| Error::InvalidData(e.to_string()))
    }

    /// Long-format CSV: one row per draw with chain, iteration, sampler
    /// statistics and every parameter.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidData(e.to_string());
        let mut header = vec!["chain".to_string(), "iter".into(), "lp".into(), "divergent".into(), "n_steps".into()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (ci, c) in self.chains.iter().enumerate() {
            for i in 0..c.len() {
                let mut row = vec![
                    ci.to_string(),
                    i.to_string(),
                    c.log_density[i].to_string(),
                    (c.divergent[i] as u8).to_string(),
                    c.n_steps[i].to_string(),
                ];
                row.extend(self.draw(ci, i).iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::InvalidData(e.to_string()))
    }
}

/// Runs `cfg.chains` independent chains in parallel on the current rayon
/// pool. Chain `k` uses stream `k` of a generator seeded by `cfg.seed`.
pub fn sample<T: LogDensity>(target: &T, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let dim = target.dim();
    let chains = (0..cfg.chains)
        .into_par_iter()
        .map(|k| run_chain(target, cfg, k))
        .collect::<Result<Vec<_>>>()?;
    PosteriorDraws::new(dim, target.parameter_names(), chains)
}

fn initial_point<T: LogDensity>(target: &T, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<PhasePoint> {
    let dim = target.dim();
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim)
            .map(|_| if cfg.init_radius > 0.0 { rng.random_range(-cfg.init_radius..cfg.init_radius) } else { 0.0 })
            .collect();
        let point = PhasePoint::new(target, q);
        if point.log_density.is_finite() && point.grad.iter().all(|g| g.is_finite()) {
            return Ok(point);
        }
    }
    Err(Error::Sampler("no finite initial point after 100 attempts".into()))
}

pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn run_chain<T: LogDensity>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<ChainDraws> {
    let dim = target.dim();
    let mut rng = chain_rng(cfg.seed, chain);
    let started = Instant::now();
    let mut z = initial_point(target, cfg, &mut rng)?;
    let mut warmup_steps = 0usize;
    if cfg.init_optimize_iters > 0 {
        let (q, evals) = init::optimize_start(target, z.q.clone(), cfg.init_optimize_iters);
        warmup_steps += evals;
        z = PhasePoint::new(target, q);
    }
    let mut ham = Hamiltonian::new(target, vec![1.0; dim]);

    let mut eps = ham.find_reasonable_step(&z, 1.0, &mut rng, &mut warmup_steps);
    let mut dual = adapt::DualAveraging::new(eps, cfg.target_accept);
    let mut schedule = WarmupSchedule::new(cfg.warmup);
    let mut variance = adapt::Welford::new(dim);

    for iter in 0..cfg.warmup {
        let t = nuts::transition(&ham, &z, eps, cfg.max_tree_depth, &mut rng);
        warmup_steps += t.n_steps;
        z = t.point;
        eps = dual.update(t.accept_stat);
        if schedule.in_window(iter) {
            variance.add(&z.q);
        }
        if schedule.is_window_end(iter) {
            let n = variance.count() as f64;
            let inv_metric: Vec<f64> = variance
                .variance()
                .iter()
                .map(|v| (n / (n + 5.0)) * v + 1e-3 * 5.0 / (n + 5.0))
                .collect();
            ham = Hamiltonian::new(target, inv_metric);
            variance.reset();
            schedule.advance(iter);
            eps = ham.find_reasonable_step(&z, eps, &mut rng, &mut warmup_steps);
            dual = adapt::DualAveraging::new(eps, cfg.target_accept);
        }
    }
    if cfg.warmup > 0 {
        eps = dual.final_step_size();
    }
    let warmup_seconds = started.elapsed().as_secs_f64();

    let n = cfg.samples;
    let mut out = ChainDraws {
        draws: Vec::with_capacity(n * dim),
        log_density: Vec::with_capacity(n),
        divergent: Vec::with_capacity(n),
        tree_depth: Vec::with_capacity(n),
        n_steps: Vec::with_capacity(n),
        accept_stat: Vec::with_capacity(n),
        step_size: eps,
        inv_metric: ham.inv_metric().to_vec(),
        warmup_steps,
        warmup_seconds,
        sampling_seconds: 0.0,
    };
    let sampling_start = Instant::now();
    for _ in 0..n {
        let t = nuts::transition(&ham, &z, eps, cfg.max_tree_depth, &mut rng);
        z = t.point;
        out.draws.extend_from_slice(&z.q);
        out.log_density.push(z.log_density);
        out.divergent.push(t.divergent);
        out.tree_depth.push(t.depth);
        out.n_steps.push(t.n_steps);
        out.accept_stat.push(t.accept_stat);
    }
    out.sampling_seconds = sampling_start.elapsed().as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct StdNormal(usize);
    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
            for (gi, qi) in g.iter_mut().zip(q) {
                *gi = -qi;
            }
            -0.5 * q.iter().map(|x| x * x).sum::<f64>()
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let cfg = SamplerConfig { chains: 2, warmup: 100, samples: 50, seed: 9, ..Default::default() };
        let a = sample(&StdNormal(3), &cfg).unwrap();
        let b = sample(&StdNormal(3), &cfg).unwrap();
        assert_eq!(a.chains[0].draws, b.chains[0].draws);
        assert_ne!(a.chains[0].draws, a.chains[1].draws);
    }

    #[test]
    fn rejects_invalid_config() {
        let cfg = SamplerConfig { target_accept: 1.0, ..Default::default() };
        assert!(sample(&StdNormal(1), &cfg).is_err());
    }

    #[test]
    fn fails_without_finite_start() {
        struct Nowhere;
        impl LogDensity for Nowhere {
            fn dim(&self) -> usize {
                1
            }
            fn log_density_grad(&self, _: &[f64], _: &mut [f64]) -> f64 {
                f64::NEG_INFINITY
            }
        }
        assert!(matches!(sample(&Nowhere, &SamplerConfig::default()), Err(Error::Sampler(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cfg = SamplerConfig { chains: 1, warmup: 20, samples: 5, ..Default::default() };
        let d = sample(&StdNormal(2), &cfg).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("chain,iter,lp,divergent,n_steps,theta[0],theta[1]"));
    }
}
