//! Built-in experiment suites.

use serde_json::json;

use super::experiment::{CvSpec, DatasetSource, ExperimentSpec, ModelKind, ModelSpec};
use crate::ensemble::{BaggingParams, BoostingParams, StackingParams};
use crate::error::{Result, SpinexError};
use crate::synthgen::{classification_suite_a, classification_suite_b, regression_suite, GenSpec};

pub const SUITE_NAMES: [&str; 4] =
    ["synthetic-regression", "synthetic-classification-a", "synthetic-classification-b", "custom"];

pub fn builtin_suite(name: &str, seed: u64) -> Result<ExperimentSpec> {
    match name {
        "synthetic-regression" => Ok(synthetic_regression(seed)),
        "synthetic-classification-a" => Ok(classification(name, seed, classification_suite_a(seed))),
        "synthetic-classification-b" => Ok(classification(name, seed, classification_suite_b(seed))),
        "custom" => Err(SpinexError::InvalidSpec("the custom suite is defined by a manifest file".into())),
        other => Err(SpinexError::InvalidSpec(format!(
            "unknown suite '{other}'; expected one of {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

/// Eighteen generated regression datasets, five models, 5-fold CV.
pub fn synthetic_regression(seed: u64) -> ExperimentSpec {
    let datasets = regression_suite(seed)
        .into_iter()
        .map(|(name, spec)| DatasetSource::Generator { name, generator: GenSpec::Regression(spec) })
        .collect();
    let models = vec![
        ModelSpec::new("SPINEX", ModelKind::Spinex { config: json!({}) }),
        ModelSpec::new(
            "BaggingSPINEX",
            ModelKind::Bagging { config: json!({}), params: BaggingParams { members: 5, seed, ..Default::default() } },
        ),
        ModelSpec::new(
            "BoostingSPINEX",
            ModelKind::Boosting { config: json!({}), params: BoostingParams { rounds: 3, learning_rate: 0.5, seed } },
        ),
        ModelSpec::new(
            "StackingSPINEX",
            ModelKind::Stacking { config: json!({}), bases: Vec::new(), params: StackingParams { folds: 5, seed } },
        ),
        ModelSpec::new("KNeighbors", ModelKind::Knn { k: 5, metric: None }),
    ];
    ExperimentSpec {
        suite: "synthetic-regression".into(),
        datasets,
        models,
        cv: CvSpec::Kfold(5),
        seed,
        explain: true,
        output_dir: None,
    }
}

fn classification(
    suite: &str,
    seed: u64,
    specs: Vec<(String, crate::synthgen::ClassificationGenSpec)>,
) -> ExperimentSpec {
    let datasets = specs
        .into_iter()
        .map(|(name, spec)| DatasetSource::Generator { name, generator: GenSpec::Classification(spec) })
        .collect();
    let models = vec![
        ModelSpec::new("SPINEXClassifier(default)", ModelKind::Spinex { config: json!({}) }),
        ModelSpec::new(
            "SPINEX",
            ModelKind::Spinex {
                config: json!({"n_neighbors": 20, "metric": "manhattan", "distance_threshold_decay": 0.95}),
            },
        ),
        ModelSpec::new(
            "BaggingSPINEX",
            ModelKind::Bagging { config: json!({}), params: BaggingParams { members: 3, seed, ..Default::default() } },
        ),
        ModelSpec::new("KNeighbors", ModelKind::Knn { k: 5, metric: None }),
    ];
    ExperimentSpec {
        suite: suite.into(),
        datasets,
        models,
        cv: CvSpec::StratifiedKfold(10),
        seed,
        explain: true,
        output_dir: None,
    }
}
