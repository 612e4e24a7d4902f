//! The SPINEX model: a lazy learner predicting from kernel-weighted nearest neighbors.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::cv::kfold_split;
use crate::data::{preprocess, Dataset, OutlierMethod, PreprocessConfig, Targets, Task};
use crate::error::{Result, SpinexError};
use crate::evalrank;
use crate::similarity::{gaussian_kernel, nearest, reciprocal_kernel, Metric, NeighborSet};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `exp(-d² / 2σ²)` with σ = kernel_width × mean neighbor distance.
    #[default]
    Gaussian,
    /// `1 / (d + distance_threshold × decay^rank)`.
    Reciprocal,
    /// Every neighbor weighs 1; plain k-nearest-neighbors.
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    #[default]
    None,
    Bagging,
    Boosting,
    Stacking,
}

/// Value substituted for a feature when it is excluded from an instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcludeMethod {
    #[default]
    Zero,
    Mean,
}

/// Hyperparameters. Field names double as the keys of the JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpinexConfig {
    pub n_neighbors: usize,
    pub metric: Metric,
    pub weighting: Weighting,
    pub kernel_width: f64,
    pub distance_threshold: f64,
    pub distance_threshold_decay: f64,
    pub ensemble_method: EnsembleMethod,
    pub n_features_to_select: Option<usize>,
    pub auto_select_features: bool,
    pub use_local_search: bool,
    pub prioritized_features: Option<Vec<usize>>,
    pub exclude_method: ExcludeMethod,
    pub preprocess: PreprocessConfig,
    /// Seed for the internal cross-validation of feature selection.
    pub seed: u64,
}

impl Default for SpinexConfig {
    fn default() -> Self {
        SpinexConfig::regression_default()
    }
}

impl SpinexConfig {
    pub fn regression_default() -> Self {
        SpinexConfig {
            n_neighbors: 5,
            metric: Metric::Manhattan,
            weighting: Weighting::Gaussian,
            kernel_width: 1.0,
            distance_threshold: 0.05,
            distance_threshold_decay: 0.05,
            ensemble_method: EnsembleMethod::None,
            n_features_to_select: None,
            auto_select_features: false,
            use_local_search: false,
            prioritized_features: None,
            exclude_method: ExcludeMethod::Zero,
            preprocess: PreprocessConfig::default(),
            seed: 0,
        }
    }

    pub fn classification_default() -> Self {
        SpinexConfig { metric: Metric::Euclidean, distance_threshold_decay: 0.95, ..SpinexConfig::regression_default() }
    }

    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Regression => SpinexConfig::regression_default(),
            Task::Classification => SpinexConfig::classification_default(),
        }
    }

    /// Parses a JSON config, filling absent keys from the defaults of `task`.
    pub fn from_json_for_task(json: &str, task: Task) -> Result<Self> {
        let mut base = serde_json::to_value(SpinexConfig::default_for(task))?;
        let overlay: serde_json::Value = serde_json::from_str(json)?;
        merge_json(&mut base, overlay);
        Ok(serde_json::from_value(base)?)
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |msg: String| Err(SpinexError::InvalidConfig(msg));
        if self.n_neighbors == 0 {
            return bad("n_neighbors must be at least 1".into());
        }
        if !(self.kernel_width > 0.0) {
            return Err(SpinexError::NonPositiveKernelWidth(self.kernel_width));
        }
        if !(self.distance_threshold >= 0.0) {
            return bad(format!("distance_threshold must be >= 0, got {}", self.distance_threshold));
        }
        if !(self.distance_threshold_decay > 0.0 && self.distance_threshold_decay <= 1.0) {
            return bad(format!("distance_threshold_decay must be in (0, 1], got {}", self.distance_threshold_decay));
        }
        if let Some(k) = self.n_features_to_select {
            if k == 0 || k > n_features {
                return bad(format!("n_features_to_select must be in 1..={n_features}, got {k}"));
            }
        }
        if let Some(p) = &self.prioritized_features {
            if let Some(&bad_idx) = p.iter().find(|&&i| i >= n_features) {
                return Err(SpinexError::InvalidFeatureIndex { index: bad_idx, n_features });
            }
        }
        Ok(())
    }

    /// Weights for a distance prefix that is already sorted ascending.
    pub fn weigh(&self, sorted_distances: &[f64]) -> Vec<f64> {
        match self.weighting {
            Weighting::Gaussian => gaussian_kernel(sorted_distances, self.kernel_width),
            Weighting::Reciprocal => {
                reciprocal_kernel(sorted_distances, self.distance_threshold, self.distance_threshold_decay)
            }
            Weighting::Uniform => vec![1.0; sorted_distances.len()],
        }
    }
}

fn merge_json(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Fitted state: the retained (preprocessed, column-selected) training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinexModel {
    config: SpinexConfig,
    task: Task,
    train_features: Array2<f64>,
    train_targets: Targets,
    selected_features: Vec<usize>,
    feature_names: Vec<String>,
    n_classes: usize,
    feature_means: Vec<f64>,
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
}

impl SpinexModel {
    pub fn fit(config: &SpinexConfig, d: &Dataset) -> Result<Self> {
        if d.is_empty() {
            return Err(SpinexError::EmptyDataset);
        }
        config.validate(d.n_features())?;
        let pre = preprocess(d, &config.preprocess)?;
        if pre.is_empty() {
            return Err(SpinexError::EmptyDataset);
        }
        let selected =
            if config.auto_select_features { select_features(config, &pre)? } else { (0..d.n_features()).collect() };
        let x = pre.features();
        let n = x.nrows() as f64;
        let feature_means = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let feature_min = x.columns().into_iter().map(|c| c.fold(f64::INFINITY, |a, &b| a.min(b))).collect();
        let feature_max = x.columns().into_iter().map(|c| c.fold(f64::NEG_INFINITY, |a, &b| a.max(b))).collect();
        Ok(SpinexModel {
            config: config.clone(),
            task: d.task(),
            train_features: x.select(Axis(1), &selected).as_standard_layout().into_owned(),
            train_targets: pre.targets().clone(),
            selected_features: selected,
            feature_names: d.feature_names().to_vec(),
            n_classes: d.n_classes(),
            feature_means,
            feature_min,
            feature_max,
        })
    }

    pub fn config(&self) -> &SpinexConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Width of the query rows the model accepts (before column selection).
    pub fn n_features(&self) -> usize {
        self.feature_means.len()
    }

    pub fn n_train(&self) -> usize {
        self.train_features.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_labels(&self) -> Vec<usize> {
        (0..self.n_classes).collect()
    }

    pub fn selected_features(&self) -> &[usize] {
        &self.selected_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    /// Training (min, max) of original column `j`.
    pub fn feature_range(&self, j: usize) -> (f64, f64) {
        (self.feature_min[j], self.feature_max[j])
    }

    pub fn train_features(&self) -> ArrayView2<'_, f64> {
        self.train_features.view()
    }

    pub fn train_targets(&self) -> &Targets {
        &self.train_targets
    }

    /// Neighbors (with configured weights) of one full-width query row.
    pub fn neighbors(&self, row: &[f64]) -> NeighborSet {
        let q: Vec<f64> = self.selected_features.iter().map(|&j| row[j]).collect();
        let metric = self.config.metric;
        let dist: Vec<f64> = self
            .train_features
            .rows()
            .into_iter()
            .map(|r| metric.distance(&q, r.as_slice().expect("standard layout")))
            .collect();
        let (indices, distances) = nearest(&dist, self.config.n_neighbors);
        let weights = self.config.weigh(&distances);
        NeighborSet { indices, distances, weights }
    }

    /// Weighted mean of neighbor targets; unweighted if the weights vanish.
    pub fn value_from(&self, ns: &NeighborSet) -> f64 {
        let y = self.train_targets.as_real().expect("regression model");
        let total: f64 = ns.weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            ns.indices.iter().zip(&ns.weights).map(|(&i, w)| w * y[i]).sum::<f64>() / total
        } else {
            ns.indices.iter().map(|&i| y[i]).sum::<f64>() / ns.len() as f64
        }
    }

    /// Per-class share of neighbor weight; uniform if the weights vanish.
    pub fn proba_from(&self, ns: &NeighborSet) -> Vec<f64> {
        let labels = self.train_targets.as_labels().expect("classification model");
        let k = self.n_classes;
        let mut sums = vec![0.0; k];
        for (&i, &w) in ns.indices.iter().zip(&ns.weights) {
            sums[labels[i]] += w;
        }
        let total: f64 = sums.iter().sum();
        if total > 0.0 && total.is_finite() {
            sums.iter_mut().for_each(|s| *s /= total);
            sums
        } else {
            vec![1.0 / k as f64; k]
        }
    }

    pub(crate) fn value_row(&self, row: &[f64]) -> f64 {
        self.value_from(&self.neighbors(row))
    }

    pub(crate) fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.proba_from(&self.neighbors(row))
    }

    pub(crate) fn check_query(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        check_query_shape(x, self.n_features())
    }

    fn require(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(SpinexError::TaskMismatch { expected: task.as_str() });
        }
        Ok(())
    }

    pub fn predict_regression(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.require(Task::Regression)?;
        self.check_query(x)?;
        Ok(par_rows(x, |row| self.value_row(row)))
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.require(Task::Classification)?;
        self.check_query(x)?;
        let rows = par_rows(x, |row| self.proba_row(row));
        Ok(stack_rows(rows, self.n_classes))
    }

    pub fn predict_class(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        self.require(Task::Classification)?;
        self.check_query(x)?;
        Ok(par_rows(x, |row| argmax(&self.proba_row(row))))
    }

    /// Accuracy for classifiers, R² for regressors.
    pub fn score(&self, x: ArrayView2<'_, f64>, y: &Targets) -> Result<f64> {
        match (self.task, y) {
            (Task::Regression, Targets::Real(actual)) => evalrank::r2(actual, &self.predict_regression(x)?),
            (Task::Classification, Targets::Labels(actual)) => evalrank::accuracy(actual, &self.predict_class(x)?),
            _ => Err(SpinexError::TaskMismatch { expected: self.task.as_str() }),
        }
    }
}

pub(crate) fn check_query_shape(x: ArrayView2<'_, f64>, n_features: usize) -> Result<()> {
    if x.ncols() != n_features {
        return Err(SpinexError::DimensionMismatch { expected: n_features, actual: x.ncols() });
    }
    if let Some((i, _)) = x.rows().into_iter().enumerate().find(|(_, r)| r.iter().any(|v| v.is_nan())) {
        return Err(SpinexError::MissingInQuery(i));
    }
    Ok(())
}

/// Applies `f` to each row in parallel, preserving row order.
pub(crate) fn par_rows<T: Send>(x: ArrayView2<'_, f64>, f: impl Fn(&[f64]) -> T + Sync) -> Vec<T> {
    let x = x.as_standard_layout();
    x.axis_iter(Axis(0)).into_par_iter().map(|r| f(r.as_slice().expect("standard layout"))).collect()
}

pub(crate) fn stack_rows(rows: Vec<Vec<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect()).expect("uniform row width")
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy forward feature selection with optional single-swap hill climbing.
///
/// Candidate subsets are scored by 3-fold cross-validation of a default model
/// for the task (R² over pooled out-of-fold predictions, or accuracy).
/// Prioritized features are always kept. Returns ascending column indices.
pub fn select_features(config: &SpinexConfig, d: &Dataset) -> Result<Vec<usize>> {
    let n_features = d.n_features();
    let budget = config.n_features_to_select.unwrap_or(n_features.div_ceil(2));
    if budget == 0 || budget > n_features {
        return Err(SpinexError::InvalidConfig(format!(
            "n_features_to_select must be in 1..={n_features}, got {budget}"
        )));
    }
    let prioritized: BTreeSet<usize> = config.prioritized_features.iter().flatten().copied().collect();
    if let Some(&i) = prioritized.iter().find(|&&i| i >= n_features) {
        return Err(SpinexError::InvalidFeatureIndex { index: i, n_features });
    }
    if prioritized.len() > budget {
        return Err(SpinexError::TooManyPrioritizedFeatures { prioritized: prioritized.len(), budget });
    }
    if budget == n_features {
        return Ok((0..n_features).collect());
    }
    let mut selected: Vec<usize> = prioritized.iter().copied().collect();
    if selected.len() == budget {
        return Ok(selected);
    }

    let scorer = SubsetScorer::new(d, config.seed)?;
    let mut current = f64::NEG_INFINITY;
    while selected.len() < budget {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..n_features).filter(|c| !selected.contains(c)) {
            let mut cand = selected.clone();
            cand.push(c);
            let s = scorer.score(&cand)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        let (c, s) = best.expect("budget below feature count leaves a candidate");
        selected.push(c);
        current = s;
    }

    if config.use_local_search {
        let mut evaluations = 0;
        let max_evaluations = n_features * n_features;
        'climb: loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for (pos, &out) in selected.iter().enumerate() {
                if prioritized.contains(&out) {
                    continue;
                }
                for inn in (0..n_features).filter(|c| !selected.contains(c)) {
                    if evaluations >= max_evaluations {
                        break;
                    }
                    let mut cand = selected.clone();
                    cand[pos] = inn;
                    let s = scorer.score(&cand)?;
                    evaluations += 1;
                    if s > best.map_or(current, |b| b.2) {
                        best = Some((pos, inn, s));
                    }
                }
            }
            match best {
                Some((pos, inn, s)) => {
                    selected[pos] = inn;
                    current = s;
                }
                None => break 'climb,
            }
            if evaluations >= max_evaluations {
                break;
            }
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

struct SubsetScorer<'a> {
    d: &'a Dataset,
    folds: Vec<crate::bench::cv::Fold>,
    config: SpinexConfig,
}

impl<'a> SubsetScorer<'a> {
    fn new(d: &'a Dataset, seed: u64) -> Result<Self> {
        let k = 3.min(d.n_samples());
        let folds = if k >= 2 { kfold_split(d.n_samples(), k, seed)? } else { Vec::new() };
        let mut config = SpinexConfig::default_for(d.task());
        config.preprocess = PreprocessConfig { outlier_handling_method: OutlierMethod::None, ..Default::default() };
        Ok(SubsetScorer { d, folds, config })
    }

    fn score(&self, cols: &[usize]) -> Result<f64> {
        if self.folds.is_empty() {
            return Ok(0.0);
        }
        let sub = self.d.select_columns(cols);
        match sub.targets() {
            Targets::Real(y) => {
                let mut pred = vec![0.0; y.len()];
                for fold in &self.folds {
                    let m = SpinexModel::fit(&self.config, &sub.select_rows(&fold.train))?;
                    let xt = sub.features().select(Axis(0), &fold.test);
                    for (&i, p) in fold.test.iter().zip(m.predict_regression(xt.view())?) {
                        pred[i] = p;
                    }
                }
                match evalrank::r2(y, &pred) {
                    Err(SpinexError::ConstantActuals) => Ok(0.0),
                    other => other,
                }
            }
            Targets::Labels(y) => {
                let mut correct = 0usize;
                for fold in &self.folds {
                    let m = SpinexModel::fit(&self.config, &sub.select_rows(&fold.train))?;
                    let xt = sub.features().select(Axis(0), &fold.test);
                    correct += fold.test.iter().zip(m.predict_class(xt.view())?).filter(|(&i, p)| y[i] == *p).count();
                }
                Ok(correct as f64 / y.len() as f64)
            }
        }
    }
}
