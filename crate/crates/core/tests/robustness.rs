mod common;

use common::{oracle_ccdf, oracle_conditional_mean};
use fastthresh::robustness::{
    aggregate_rate_ratio, census_sweep, generate, generate_records, placebo, ppc_frisk, subset_disaggregate, ModelKind,
    SyntheticSpec,
};
use fastthresh::{Layout, ModelParams, PriorConfig, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn two_race_params(locations: usize, centers: [f64; 2]) -> ModelParams {
    let l = Layout::new(2, locations).unwrap();
    ModelParams::from_race_effects(l, vec![-1.2, -0.6], vec![0.3, 0.0], centers.to_vec()).unwrap()
}

#[test]
fn noiseless_synthetic_rates_match_quadrature() {
    let p = two_race_params(2, [-2.0, -1.0]);
    let n = 200_000;
    let cells = generate(&SyntheticSpec::uniform(p.clone(), n, 0.0, 12)).unwrap();
    for c in &cells {
        let phi = logistic(p.logit_phi(c.race, c.location));
        let delta = p.ln_delta(c.race, c.location).exp();
        let t = p.threshold(c.race, c.location);
        let s = oracle_ccdf(t, phi, delta);
        let rate = c.searches as f64 / c.stops as f64;
        assert!((rate - s).abs() < 4.0 * (s * (1.0 - s) / n as f64).sqrt(), "search {rate} vs {s}");
        let h = oracle_conditional_mean(t, phi, delta);
        let hit = c.hits as f64 / c.searches as f64;
        assert!((hit - h).abs() < 4.0 * (h * (1.0 - h) / c.searches as f64).sqrt(), "hit {hit} vs {h}");
    }
}

#[test]
fn threshold_noise_reuses_random_numbers() {
    let p = two_race_params(2, [-2.0, -1.0]);
    let base = SyntheticSpec::uniform(p, 5000, 0.0, 4);
    let a = generate(&base).unwrap();
    let b = generate(&base).unwrap();
    assert_eq!(a, b);
    let noisy = generate(&SyntheticSpec { heterogeneity_sigma: 0.5, ..base.clone() }).unwrap();
    assert_ne!(a, noisy);
    for (x, y) in a.iter().zip(&noisy) {
        assert_eq!(x.stops, y.stops);
    }
}

#[test]
fn ppc_at_the_truth_is_sampling_noise_and_shrinks_with_counts() {
    let p = two_race_params(3, [-2.0, -1.5]);
    let rmse = |n: u64| {
        let cells = generate(&SyntheticSpec::uniform(p.clone(), n, 0.0, 8)).unwrap();
        let report = ppc_frisk(&p, &cells).unwrap();
        let noise: f64 = report
            .cells
            .iter()
            .map(|c| c.predicted_rate * (1.0 - c.predicted_rate) / n as f64)
            .sum::<f64>()
            / report.cells.len() as f64;
        (report.rate_rmse, noise.sqrt())
    };
    let (small, small_noise) = rmse(2_000);
    let (large, large_noise) = rmse(200_000);
    // six cells give a loose chi-square band around the expected noise
    assert!(small < 3.0 * small_noise && small > 0.1 * small_noise, "{small} vs {small_noise}");
    assert!(large < 3.0 * large_noise, "{large} vs {large_noise}");
    assert!(large < small);
}

#[test]
fn aggregate_rate_ratio_is_one_without_a_shift() {
    let p = two_race_params(3, [-2.0, -1.5]);
    let stops = [3.0, 1.0, 2.0, 5.0, 1.0, 1.0];
    assert!((aggregate_rate_ratio(&p, &stops, 0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(aggregate_rate_ratio(&p, &stops, 0, 0.5).unwrap() < 1.0);
    assert!(aggregate_rate_ratio(&p, &stops[..5], 0, 0.5).is_err());
}

#[test]
fn census_sweep_rejects_bad_factors() {
    let l = Layout::new(2, 1).unwrap();
    let cfg = SamplerConfig::default();
    assert!(census_sweep(l, &[], 0, &[0.0], &PriorConfig::default(), &cfg).is_err());
    assert!(census_sweep(l, &[], 2, &[1.0], &PriorConfig::default(), &cfg).is_err());
}

fn small_fit() -> SamplerConfig {
    SamplerConfig { chains: 2, warmup: 300, samples: 300, seed: 6, ..SamplerConfig::default() }
}

fn labelled_records() -> Vec<fastthresh::RawStopRecord> {
    // three races over six locations: with two observed rates per cell the
    // race and location effects are only identified once races > 2 and the
    // thresholds sit in the sparse upper tail, as in real frisk data
    let l = Layout::new(3, 6).unwrap();
    let mut p = ModelParams::from_race_effects(l, vec![-3.3, -3.6, -3.5], vec![0.0, 0.1, 0.05], vec![-2.0, -3.0, -4.0])
        .unwrap();
    p.phi_loc = vec![0.0, 0.6, -0.5, 0.3, -0.2, 0.4];
    p.lambda_loc = vec![0.0, 0.3, -0.2, -0.4, 0.1, 0.2];
    let races: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let locs: Vec<String> = ["u", "v", "w", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let mut records = generate_records(&SyntheticSpec::uniform(p, 10_000, 0.0, 2), &races, &locs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for r in &mut records {
        let shift = if rng.random::<bool>() { "day" } else { "night" };
        r.extra.insert("shift".into(), shift.into());
    }
    records
}

#[test]
fn placebo_labels_overlap_while_real_groups_separate() {
    let records = labelled_records();
    let priors = PriorConfig::default();
    let fake = placebo(&records, "shift", ModelKind::Frisk, &priors, &small_fit()).unwrap();
    assert_eq!(fake.levels, vec!["day", "night"]);
    assert!(fake.all_overlap());
    let real = placebo(&records, "race", ModelKind::Frisk, &priors, &small_fit()).unwrap();
    assert!(real.all_separate(), "{:?}", real.fit.thresholds.races);
}

#[test]
fn disaggregation_fits_each_level_and_skips_empty_ones() {
    let records = labelled_records();
    let levels = vec!["day".to_string(), "dawn".to_string(), "night".to_string()];
    let (races, locs, fits) =
        subset_disaggregate(&records, "shift", Some(&levels), &PriorConfig::default(), &small_fit()).unwrap();
    assert_eq!(races.len(), 3);
    assert_eq!(locs.len(), 6);
    let names: Vec<&str> = fits.iter().map(|f| f.level.as_str()).collect();
    assert_eq!(names, ["day", "night"]);
    assert_eq!(fits.iter().map(|f| f.records).sum::<usize>(), records.len());
}

#[test]
fn refit_covers_the_generating_thresholds() {
    let mut p = two_race_params(8, [-2.2, -1.4]);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for d in 1..8 {
        p.phi_loc[d] = 0.4 * (rng.random::<f64>() - 0.5);
        p.lambda_loc[d] = 0.3 * (rng.random::<f64>() - 0.5);
    }
    for i in 0..p.logit_threshold.len() {
        p.logit_threshold[i] += rng.random::<f64>() - 0.5;
    }
    let cells = generate(&SyntheticSpec::uniform(p.clone(), 100_000, 0.0, 9)).unwrap();
    let model = fastthresh::FriskModel::new(p.layout, cells, PriorConfig::default()).unwrap();
    let fit = fastthresh::fit::fit_frisk(&model, &small_fit()).unwrap();
    let covered = fit
        .thresholds
        .cells
        .iter()
        .filter(|c| {
            let t = p.threshold(c.race, c.location);
            c.lower <= t && t <= c.upper
        })
        .count();
    assert!(covered * 10 >= 9 * fit.thresholds.cells.len(), "{covered}/{}", fit.thresholds.cells.len());
}

#[test]
fn threshold_noise_raises_frisk_rates_for_high_thresholds() {
    // thresholds far above most of the risk mass, where the search rate is
    // convex in the logit threshold
    let p = two_race_params(2, [-0.5, 0.0]);
    let base = SyntheticSpec::uniform(p, 50_000, 0.0, 17);
    let quiet = generate(&base).unwrap();
    let noisy = generate(&SyntheticSpec { heterogeneity_sigma: 1.0, ..base }).unwrap();
    for (q, n) in quiet.iter().zip(&noisy) {
        assert!(n.searches > q.searches, "{} vs {}", n.searches, q.searches);
    }
}

#[test]
fn ppc_does_not_depend_on_cell_order() {
    let p = two_race_params(3, [-2.0, -1.5]);
    let cells = generate(&SyntheticSpec::uniform(p.clone(), 3000, 0.0, 5)).unwrap();
    let a = ppc_frisk(&p, &cells).unwrap();
    let mut shuffled = cells.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    let b = ppc_frisk(&p, &shuffled).unwrap();
    assert!((a.rate_rmse - b.rate_rmse).abs() <= 1e-15 * a.rate_rmse.max(1e-300));
    assert!((a.hit_rmse - b.hit_rmse).abs() <= 1e-15 * a.hit_rmse.max(1e-300));
}
