//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string; the plain functions behind them are
//! usable (and tested) natively.

use std::cell::OnceCell;

use lal_core::data::{split, Dataset, GeneratorSpec};
use lal_core::forest::ForestConfig;
use lal_core::harness::{motivation_experiment, run_al, AlConfig, MotivationConfig, StartMode};
use lal_core::lal_training::{build_cold_start_strategy, ColdStartConfig, MonteCarloConfig};
use lal_core::metrics::Metric;
use lal_core::seed::derive_seed;
use lal_core::strategies::{Provenance, Strategy};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

pub const DATASETS: [&str; 5] = [
    "gaussian",
    "unbalanced",
    "checkerboard2",
    "checkerboard4",
    "banana",
];

fn spec(kind: &str, n: usize) -> Result<GeneratorSpec, String> {
    Ok(match kind {
        "gaussian" => GeneratorSpec::GaussianClouds {
            n,
            class0_fraction: 0.5,
            separation: 2.0,
            dim: 2,
        },
        "unbalanced" => GeneratorSpec::GaussianClouds {
            n,
            class0_fraction: 2.0 / 3.0,
            separation: 2.0,
            dim: 2,
        },
        "checkerboard2" => GeneratorSpec::Checkerboard { k: 2, n },
        "checkerboard4" => GeneratorSpec::Checkerboard { k: 4, n },
        "banana" => GeneratorSpec::Banana { n, noise: 0.15 },
        other => {
            return Err(format!(
                "unknown dataset `{other}`; expected one of {DATASETS:?}"
            ))
        }
    })
}

#[derive(Serialize)]
struct Points<'a> {
    x: Vec<f64>,
    y: Vec<f64>,
    labels: &'a [u8],
}

fn points(d: &Dataset) -> Points<'_> {
    Points {
        x: d.rows().map(|r| r[0]).collect(),
        y: d.rows().map(|r| r[1]).collect(),
        labels: d.labels(),
    }
}

pub fn dataset_json(kind: &str, n: usize, seed: u32) -> Result<String, String> {
    let d = spec(kind, n)?
        .generate(u64::from(seed))
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&points(&d)).map_err(|e| e.to_string())
}

pub fn motivation_json(balanced: bool, repetitions: usize, seed: u32) -> Result<String, String> {
    let config = MotivationConfig {
        balanced,
        repetitions,
        test_size: 1000,
        ..MotivationConfig::default()
    };
    let bins = motivation_experiment(&config, u64::from(seed)).map_err(|e| e.to_string())?;
    serde_json::to_string(&bins).map_err(|e| e.to_string())
}

fn demo_classifier() -> ForestConfig {
    ForestConfig {
        features_per_split: Some(1),
        ..ForestConfig::classifier().with_trees(20)
    }
}

thread_local! {
    static SMALL_LAL: OnceCell<Result<Strategy, String>> = const { OnceCell::new() };
}

/// A quickly built cold-start strategy, cached for the page's lifetime.
fn small_lal() -> Result<Strategy, String> {
    SMALL_LAL.with(|cell| {
        cell.get_or_init(|| {
            let config = ColdStartConfig {
                monte_carlo: MonteCarloConfig {
                    tau_max: 12,
                    q: 4,
                    m: 6,
                    classifier: demo_classifier(),
                    regressor: ForestConfig::regressor().with_trees(30),
                    ..MonteCarloConfig::default()
                },
                provenance: Provenance::Independent,
                n_train: 300,
                n_test: 300,
                ..ColdStartConfig::default()
            };
            build_cold_start_strategy(&config)
                .map(|(s, _)| s)
                .map_err(|e| e.to_string())
        })
        .clone()
    })
}

pub fn simulate_json(
    kind: &str,
    n: usize,
    strategy: &str,
    budget: usize,
    seed: u32,
) -> Result<String, String> {
    let strategy = match strategy {
        "random" => Strategy::Random,
        "uncertainty" => Strategy::Uncertainty,
        "lal" => small_lal()?,
        other => return Err(format!("unknown strategy `{other}`")),
    };
    let seed = u64::from(seed);
    let data = spec(kind, n)?
        .generate(derive_seed(seed, &[0]))
        .map_err(|e| e.to_string())?;
    let (train, test) = split(&data, 0.5, derive_seed(seed, &[1])).map_err(|e| e.to_string())?;
    let config = AlConfig {
        budget,
        metric: Metric::Accuracy,
        start: StartMode::Cold,
        classifier: demo_classifier(),
    };
    let run = run_al(&train, &test, &strategy, &config, derive_seed(seed, &[2]))
        .map_err(|e| e.to_string())?;
    let initial: Vec<usize> = run.final_pool.labeled()[..2].to_vec();
    let report = json!({
        "strategy": strategy.id(),
        "train": points(&train),
        "initial": initial,
        "selections": run.selections.records,
        "accuracy": run.trace,
    });
    Ok(report.to_string())
}

fn js(result: Result<String, String>) -> Result<String, JsValue> {
    result.map_err(|e| JsValue::from_str(&e))
}

/// `{x, y, labels}` for one of [`DATASETS`].
#[wasm_bindgen]
pub fn generate_dataset(kind: &str, n: usize, seed: u32) -> Result<String, JsValue> {
    js(dataset_json(kind, n, seed))
}

/// Binned mean 0/1-loss reduction against the start classifier's p0.
#[wasm_bindgen]
pub fn error_reduction_curve(
    balanced: bool,
    repetitions: usize,
    seed: u32,
) -> Result<String, JsValue> {
    js(motivation_json(balanced, repetitions, seed))
}

/// One cold-start active-learning run with `random`, `uncertainty` or `lal`.
#[wasm_bindgen]
pub fn simulate(
    kind: &str,
    n: usize,
    strategy: &str,
    budget: usize,
    seed: u32,
) -> Result<String, JsValue> {
    js(simulate_json(kind, n, strategy, budget, seed))
}
