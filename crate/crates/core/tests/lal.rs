use std::sync::OnceLock;

use lal_core::data::{gaussian_clouds, GeneratorSpec};
use lal_core::forest::ForestConfig;
use lal_core::harness::{run_repeated, AlConfig, ExperimentData, StrategyOutcome};
use lal_core::lal_training::{
    build_cold_start_strategy, data_monte_carlo, ColdStartConfig, SplitProcedure,
};
use lal_core::metrics::Metric;
use lal_core::seed::derive_seed;
use lal_core::strategies::Strategy;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn uncertain_candidates_reduce_error_most_at_cold_start() {
    let train = gaussian_clouds(200, 0.5, 2.0, 2, 1).unwrap();
    let test = gaussian_clouds(1000, 0.5, 2.0, 2, 2).unwrap();
    let classifier = ForestConfig::classifier().with_trees(20);
    let (mut central, mut extreme) = (Vec::new(), Vec::new());
    for q in 0..200 {
        let rows = data_monte_carlo(
            &train,
            &test,
            &classifier,
            SplitProcedure::Random,
            2,
            20,
            Metric::ZeroOne,
            q,
            derive_seed(5, &[q as u64]),
        )
        .unwrap();
        for (state, &delta) in rows.states.iter().zip(&rows.deltas) {
            assert!((-1.0..=1.0).contains(&delta));
            let p = state.psi();
            if (0.45..=0.55).contains(&p) {
                central.push(delta);
            } else if p <= 0.1 || p >= 0.9 {
                extreme.push(delta);
            }
        }
    }
    assert!(
        central.len() > 30 && extreme.len() > 30,
        "{} {}",
        central.len(),
        extreme.len()
    );
    assert!(
        mean(&central) > mean(&extreme),
        "central {} extreme {}",
        mean(&central),
        mean(&extreme)
    );
}

fn gaussian_strategy() -> &'static Strategy {
    static STRATEGY: OnceLock<Strategy> = OnceLock::new();
    STRATEGY.get_or_init(|| {
        let mut config = ColdStartConfig::default();
        config.monte_carlo.seed = 1;
        config.monte_carlo.classifier.features_per_split = Some(1);
        build_cold_start_strategy(&config).unwrap().0
    })
}

fn benchmark(spec: GeneratorSpec, budget: usize, seed: u64) -> Vec<StrategyOutcome> {
    let data = ExperimentData::Generated {
        spec,
        test_fraction: 0.5,
    };
    let config = AlConfig {
        budget,
        classifier: ForestConfig {
            features_per_split: Some(1),
            ..ForestConfig::classifier()
        },
        ..AlConfig::default()
    };
    run_repeated(
        &data,
        &[Strategy::Random, gaussian_strategy().clone()],
        &config,
        50,
        seed,
    )
    .unwrap()
}

#[test]
fn gaussian_strategy_selects_near_even_odds() {
    let out = benchmark(
        GeneratorSpec::GaussianClouds {
            n: 400,
            class0_fraction: 0.5,
            separation: 2.0,
            dim: 2,
        },
        20,
        3,
    );
    let mut psi: Vec<f64> = out[1]
        .selections
        .iter()
        .flat_map(|t| t.probabilities())
        .collect();
    psi.sort_by(f64::total_cmp);
    let median = psi[psi.len() / 2];
    assert!(
        (0.35..=0.65).contains(&median),
        "median selected p0 {median}"
    );
}

#[test]
fn gaussian_strategy_transfers_to_banana() {
    let out = benchmark(
        GeneratorSpec::Banana {
            n: 1000,
            noise: 0.15,
        },
        60,
        14,
    );
    let (random, lal) = (out[0].curve.mean_at(60), out[1].curve.mean_at(60));
    assert!(lal > random, "lal {lal} vs random {random}");
}
