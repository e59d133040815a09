//! Fixtures shared by the benchmarks.

use fastthresh::model::{FriskModel, Layout, ModelParams, PrecinctStopData, PriorConfig, StopModel};
use fastthresh::robustness::{generate, generate_stop_data, StopSyntheticSpec, SyntheticSpec};

/// Three races over `locations` precincts with deterministic location
/// effects and thresholds, so runs are comparable across machines.
pub fn design(locations: usize) -> ModelParams {
    let layout = Layout::new(3, locations).expect("valid layout");
    let mut p = ModelParams::from_race_effects(layout, vec![-3.3, -3.6, -3.5], vec![0.0, 0.1, 0.05], vec![-3.0, -3.9, -3.6])
        .expect("valid parameters");
    for d in 1..locations {
        p.phi_loc[d] = 0.3 * (d as f64).sin();
        p.lambda_loc[d] = 0.15 * (1.7 * d as f64).cos();
    }
    for r in 0..3 {
        for d in 0..locations {
            p.logit_threshold[layout.cell_index(r, d)] = p.threshold_center[r] + (0.9 * (r * locations + d) as f64).sin();
        }
    }
    p
}

pub fn frisk_model(locations: usize) -> (FriskModel, ModelParams) {
    let truth = design(locations);
    let cells = generate(&SyntheticSpec::uniform(truth.clone(), 10_000, 0.0, 7)).expect("synthetic data");
    (FriskModel::new(truth.layout, cells, PriorConfig::default()).expect("valid model"), truth)
}

pub fn stop_model(locations: usize) -> (StopModel, ModelParams) {
    let truth = design(locations);
    let census: Vec<Vec<f64>> = (0..locations).map(|_| vec![0.45, 0.35, 0.2]).collect();
    let spec = StopSyntheticSpec {
        params: truth.clone(),
        census,
        encounters: vec![200_000; locations],
        heterogeneity_sigma: 0.0,
        seed: 7,
    };
    let data: Vec<PrecinctStopData> = generate_stop_data(&spec).expect("synthetic data");
    (StopModel::new(truth.layout, data, PriorConfig::default()).expect("valid model"), truth)
}
