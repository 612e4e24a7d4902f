//! Similarity-based prediction with explainable neighbors.
//!
//! A lazy learner that predicts from kernel-weighted nearest neighbors and
//! explains its predictions by re-predicting with features excluded:
//!
//! - [`data`]: datasets, CSV ingestion, imputation, outlier filtering, health checks
//! - [`similarity`]: distance matrices and neighbor weighting kernels
//! - [`predictor`]: the [`SpinexModel`] regressor/classifier and feature selection
//! - [`explain`]: contributions, interactions, importances and local what-if analysis
//! - [`ensemble`]: bagging, boosting and stacking over base models
//! - [`synthgen`]: seeded synthetic regression and classification generators
//! - [`evalrank`]: metrics and rank-sum model ranking
//! - [`bench`]: cross-validation splitters, experiment runner and report emission

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod data;
pub mod ensemble;
mod error;
pub mod evalrank;
pub mod explain;
pub(crate) mod linalg;
pub mod model;
pub mod predictor;
pub mod similarity;
pub mod synthgen;

pub use crate::data::{Dataset, HealthReport, MissingDataMethod, OutlierMethod, PreprocessConfig, Targets, Task};
pub use crate::ensemble::{EnsembleKind, EnsembleModel};
pub use crate::error::{Result, SpinexError};
pub use crate::evalrank::{Direction, MetricKind, MetricRecord, RankTable};
pub use crate::explain::{CombinationImpact, ContributionVector, InteractionMatrix, LocalExplanation};
pub use crate::model::{FittedModel, KnnBaseline, Prediction, Predictions, Predictor};
pub use crate::predictor::{EnsembleMethod, ExcludeMethod, SpinexConfig, SpinexModel, Weighting};
pub use crate::similarity::{DistanceMatrix, Metric, NeighborSet};
