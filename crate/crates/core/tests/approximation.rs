mod common;

use common::simpson;
use fastthresh::approximation::{
    fit_density, tv_distance, ApproxGrid, FitConfig, TabulatedDensity, TvConfig, UnitDensity,
};
use fastthresh::distributions::{DiscParams, RefDist};

#[test]
fn uniform_against_extreme_logit_normal_matches_quadrature() {
    let uniform = RefDist::beta(0.5, 2.0).unwrap();
    let wide = RefDist::logit_normal(0.0, 10.0).unwrap();
    // oracle on the probability scale over the interior
    let f = |t: f64| (1.0 - wide.pdf(t).unwrap()).abs();
    let inner = simpson(&f, 1e-6, 1.0 - 1e-6, 1e-10);
    // outside [1e-6, 1 - 1e-6] the logit-normal density exceeds 1, so
    // |1 - f| integrates to the tail mass minus the uniform's 2e-6
    let tails = 2.0 * wide.cdf(1e-6).unwrap();
    let oracle = 0.5 * (inner + tails - 2e-6);
    let tv = tv_distance(&uniform, &wide, &TvConfig::default());
    assert!(tv > 0.5);
    assert!((tv - oracle).abs() < 1e-4, "{tv} vs {oracle}");
}

#[test]
fn tv_is_a_metric_on_a_random_triple() {
    let cfg = TvConfig::default();
    let a = DiscParams::new(0.2, 1.1).unwrap();
    let b = RefDist::beta(0.3, 4.0).unwrap();
    let c = RefDist::logit_normal(-1.5, 0.8).unwrap();
    let (ab, ba) = (tv_distance(&a, &b, &cfg), tv_distance(&b, &a, &cfg));
    let (bc, ac) = (tv_distance(&b, &c, &cfg), tv_distance(&a, &c, &cfg));
    assert!((ab - ba).abs() < 1e-10);
    assert!(ac <= ab + bc + 1e-8);
    assert!(ab <= ac + bc + 1e-8);
    assert!(bc <= ab + ac + 1e-8);
}

#[test]
fn refining_the_quadrature_barely_moves_tv() {
    let cfg = TvConfig::default();
    let pairs: Vec<(Box<dyn UnitDensity>, Box<dyn UnitDensity>)> = vec![
        (Box::new(DiscParams::new(0.1, 2.0).unwrap()), Box::new(RefDist::beta(0.1, 5.0).unwrap())),
        (Box::new(DiscParams::new(0.3, 0.7).unwrap()), Box::new(RefDist::logit_normal(-1.0, 0.5).unwrap())),
        (Box::new(RefDist::beta(0.02, 1.0).unwrap()), Box::new(RefDist::logit_normal(-4.0, 3.0).unwrap())),
    ];
    for (a, b) in &pairs {
        let coarse = tv_distance(a.as_ref(), b.as_ref(), &cfg);
        let fine = tv_distance(a.as_ref(), b.as_ref(), &cfg.refined());
        assert!((coarse - fine).abs() < 1e-4, "{coarse} vs {fine}");
    }
}

#[test]
fn self_approximation_recovers_the_generating_distribution() {
    let truth = DiscParams::new(0.3, 1.5).unwrap();
    let table = TabulatedDensity::from_density(&truth, 20_001);
    let (fitted, tv, _) = fit_density(&table, &FitConfig::default()).unwrap();
    assert!(tv < 1e-3, "tv {tv}");
    assert!((fitted.phi() - 0.3).abs() < 1e-2, "phi {}", fitted.phi());
    assert!((fitted.delta() - 1.5).abs() < 2e-2, "delta {}", fitted.delta());
}

#[test]
fn bundled_grid_is_the_default() {
    assert_eq!(ApproxGrid::bundled(), ApproxGrid::default());
    assert_eq!(ApproxGrid::bundled().targets().unwrap().len(), 35 + 49);
    assert!(ApproxGrid::from_toml_str("beta_phi = [1.5]\nbeta_lambda = [1.0]\nlogit_normal_mu = []\nlogit_normal_sigma = []").is_err());
}
