//! Common prediction interface, the plain kNN baseline, and the serializable model envelope.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Targets, Task};
use crate::ensemble::{self, EnsembleModel};
use crate::error::{Result, SpinexError};
use crate::predictor::{check_query_shape, par_rows, stack_rows, EnsembleMethod, SpinexConfig, SpinexModel};
use crate::similarity::Metric;

/// A single prediction: a value for regressors, a label for classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Value(f64),
    Label(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictions {
    Values(Vec<f64>),
    Labels(Vec<usize>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Values(v) => v.len(),
            Predictions::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Prediction {
        match self {
            Predictions::Values(v) => Prediction::Value(v[i]),
            Predictions::Labels(v) => Prediction::Label(v[i]),
        }
    }
}

/// Anything fitted that can predict on full-width query rows.
pub trait Predictor: Send + Sync {
    fn task(&self) -> Task;
    /// Query row width.
    fn n_features(&self) -> usize;
    /// Probability columns for classifiers; zero for regressors.
    fn n_classes(&self) -> usize;
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Predictions>;
    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;
}

impl Predictor for SpinexModel {
    fn task(&self) -> Task {
        SpinexModel::task(self)
    }

    fn n_features(&self) -> usize {
        SpinexModel::n_features(self)
    }

    fn n_classes(&self) -> usize {
        SpinexModel::n_classes(self)
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Predictions> {
        match SpinexModel::task(self) {
            Task::Regression => self.predict_regression(x).map(Predictions::Values),
            Task::Classification => self.predict_class(x).map(Predictions::Labels),
        }
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        SpinexModel::predict_proba(self, x)
    }
}

/// Unweighted k-nearest-neighbors: neighbor mean or majority vote.
///
/// Ties in distance go to the lower training index; ties in the vote go to
/// the lower label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnBaseline {
    k: usize,
    metric: Metric,
    train_features: Array2<f64>,
    train_targets: Targets,
    n_classes: usize,
    feature_names: Vec<String>,
}

impl KnnBaseline {
    pub fn fit(k: usize, metric: Metric, d: &Dataset) -> Result<Self> {
        if k == 0 {
            return Err(SpinexError::InvalidConfig("k must be at least 1".into()));
        }
        if d.is_empty() {
            return Err(SpinexError::EmptyDataset);
        }
        if d.has_missing() {
            return Err(SpinexError::InvalidDataset("kNN baseline needs imputed data".into()));
        }
        Ok(KnnBaseline {
            k,
            metric,
            train_features: d.features().to_owned(),
            train_targets: d.targets().clone(),
            n_classes: d.n_classes(),
            feature_names: d.feature_names().to_vec(),
        })
    }

    fn neighbor_rows(&self, q: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .train_features
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (self.metric.distance(q, r.as_slice().expect("standard layout")), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        scored.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    fn counts(&self, q: &[f64]) -> Vec<f64> {
        let labels = self.train_targets.as_labels().expect("classification");
        let mut counts = vec![0.0; self.n_classes];
        let rows = self.neighbor_rows(q);
        for &i in &rows {
            counts[labels[i]] += 1.0;
        }
        counts.iter_mut().for_each(|c| *c /= rows.len() as f64);
        counts
    }
}

impl Predictor for KnnBaseline {
    fn task(&self) -> Task {
        self.train_targets.task()
    }

    fn n_features(&self) -> usize {
        self.train_features.ncols()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Predictions> {
        check_query_shape(x, self.n_features())?;
        match &self.train_targets {
            Targets::Real(y) => Ok(Predictions::Values(par_rows(x, |q| {
                let rows = self.neighbor_rows(q);
                rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
            }))),
            Targets::Labels(_) => Ok(Predictions::Labels(par_rows(x, |q| {
                let counts = self.counts(q);
                let mut best = 0;
                for c in 1..counts.len() {
                    if counts[c] > counts[best] {
                        best = c;
                    }
                }
                best
            }))),
        }
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if self.task() != Task::Classification {
            return Err(SpinexError::TaskMismatch { expected: "classification" });
        }
        check_query_shape(x, self.n_features())?;
        Ok(stack_rows(par_rows(x, |q| self.counts(q)), self.n_classes))
    }
}

/// Serializable envelope for every model kind; its JSON encoding is the model file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Spinex(SpinexModel),
    Ensemble(EnsembleModel),
    Knn(KnnBaseline),
}

impl FittedModel {
    /// Fits a single model or, per `config.ensemble_method`, an ensemble with default settings.
    pub fn fit(config: &SpinexConfig, d: &Dataset) -> Result<Self> {
        let base = SpinexConfig { ensemble_method: EnsembleMethod::None, ..config.clone() };
        Ok(match config.ensemble_method {
            EnsembleMethod::None => FittedModel::Spinex(SpinexModel::fit(config, d)?),
            EnsembleMethod::Bagging => {
                FittedModel::Ensemble(ensemble::fit_bagging(&base, d, &ensemble::BaggingParams::default())?)
            }
            EnsembleMethod::Boosting => {
                FittedModel::Ensemble(ensemble::fit_boosting(&base, d, &ensemble::BoostingParams::default())?)
            }
            EnsembleMethod::Stacking => FittedModel::Ensemble(ensemble::fit_stacking(
                &ensemble::default_stacking_bases(&base),
                d,
                &ensemble::StackingParams::default(),
            )?),
        })
    }

    pub fn as_predictor(&self) -> &dyn Predictor {
        match self {
            FittedModel::Spinex(m) => m,
            FittedModel::Ensemble(m) => m,
            FittedModel::Knn(m) => m,
        }
    }

    /// Column names of the training data, in query-row order.
    pub fn feature_names(&self) -> &[String] {
        match self {
            FittedModel::Spinex(m) => m.feature_names(),
            FittedModel::Ensemble(m) => m.members()[0].feature_names(),
            FittedModel::Knn(m) => &m.feature_names,
        }
    }

    pub fn as_spinex(&self) -> Option<&SpinexModel> {
        match self {
            FittedModel::Spinex(m) => Some(m),
            _ => None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Serialized size in MiB.
    pub fn size_mb(&self) -> Result<f64> {
        Ok(self.to_bytes()?.len() as f64 / (1u64 << 20) as f64)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| SpinexError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| SpinexError::io(path, e))?;
        FittedModel::from_bytes(&bytes)
    }
}

impl Predictor for FittedModel {
    fn task(&self) -> Task {
        self.as_predictor().task()
    }

    fn n_features(&self) -> usize {
        self.as_predictor().n_features()
    }

    fn n_classes(&self) -> usize {
        self.as_predictor().n_classes()
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Predictions> {
        self.as_predictor().predict(x)
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.as_predictor().predict_proba(x)
    }
}
