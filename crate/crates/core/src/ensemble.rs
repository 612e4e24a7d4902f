//! Bagging, boosting and stacking over [`SpinexModel`] members.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::cv::kfold_split;
use crate::data::{Dataset, Targets, Task};
use crate::error::{Result, SpinexError};
use crate::linalg::ridge_solve;
use crate::model::{Predictions, Predictor};
use crate::predictor::{argmax, check_query_shape, SpinexConfig, SpinexModel, Weighting};

/// Ridge damping of the stacking combiner.
pub const STACKING_RIDGE: f64 = 1e-8;
/// Error floor for boosting rounds that fit the training set perfectly.
const MIN_ROUND_ERROR: f64 = 1e-10;
const MAX_ROUND_RETRIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Bagging,
    Boosting,
    Stacking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaggingParams {
    pub members: usize,
    pub sample_fraction: f64,
    /// Train every member on the full dataset instead of a bootstrap sample.
    pub deterministic_full_sample: bool,
    pub seed: u64,
}

impl Default for BaggingParams {
    fn default() -> Self {
        BaggingParams { members: 10, sample_fraction: 1.0, deterministic_full_sample: false, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        BoostingParams { rounds: 10, learning_rate: 1.0, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackingParams {
    pub folds: usize,
    pub seed: u64,
}

impl Default for StackingParams {
    fn default() -> Self {
        StackingParams { folds: 5, seed: 0 }
    }
}

/// The configured model plus a variant with the other weighting kernel.
pub fn default_stacking_bases(config: &SpinexConfig) -> Vec<SpinexConfig> {
    let alternate = match config.weighting {
        Weighting::Reciprocal => Weighting::Gaussian,
        _ => Weighting::Reciprocal,
    };
    vec![config.clone(), SpinexConfig { weighting: alternate, ..config.clone() }]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    kind: EnsembleKind,
    task: Task,
    members: Vec<SpinexModel>,
    /// Boosting: vote weight (classification) or output scale (regression) per member.
    member_weights: Vec<f64>,
    /// Stacking: `(1 + meta features) × outputs` linear map, intercept first.
    combiner: Option<Array2<f64>>,
    n_features: usize,
    n_classes: usize,
}

impl EnsembleModel {
    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn members(&self) -> &[SpinexModel] {
        &self.members
    }

    pub fn member_weights(&self) -> &[f64] {
        &self.member_weights
    }

    pub fn combiner(&self) -> Option<&Array2<f64>> {
        self.combiner.as_ref()
    }

    pub fn predict_regression(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if self.task != Task::Regression {
            return Err(SpinexError::TaskMismatch { expected: "regression" });
        }
        check_query_shape(x, self.n_features)?;
        let outputs = self.members.iter().map(|m| m.predict_regression(x)).collect::<Result<Vec<_>>>()?;
        let n = x.nrows();
        Ok(match self.kind {
            EnsembleKind::Bagging => {
                (0..n).map(|i| outputs.iter().map(|o| o[i]).sum::<f64>() / outputs.len() as f64).collect()
            }
            EnsembleKind::Boosting => {
                (0..n).map(|i| outputs.iter().zip(&self.member_weights).map(|(o, w)| w * o[i]).sum()).collect()
            }
            EnsembleKind::Stacking => {
                let meta = Array2::from_shape_fn((n, outputs.len()), |(i, j)| outputs[j][i]);
                self.combine(meta).column(0).to_vec()
            }
        })
    }

    pub fn predict_class(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        if self.task != Task::Classification {
            return Err(SpinexError::TaskMismatch { expected: "classification" });
        }
        check_query_shape(x, self.n_features)?;
        match self.kind {
            EnsembleKind::Bagging | EnsembleKind::Boosting => {
                let votes = self.members.iter().map(|m| m.predict_class(x)).collect::<Result<Vec<_>>>()?;
                let weights: Vec<f64> = match self.kind {
                    EnsembleKind::Bagging => vec![1.0; self.members.len()],
                    _ => self.member_weights.clone(),
                };
                Ok((0..x.nrows())
                    .map(|i| {
                        let mut tally = vec![0.0; self.n_classes];
                        for (v, w) in votes.iter().zip(&weights) {
                            tally[v[i]] += w;
                        }
                        argmax(&tally)
                    })
                    .collect())
            }
            EnsembleKind::Stacking => {
                let scores = self.combine(self.stacked_proba(x)?);
                Ok(scores.rows().into_iter().map(|r| argmax(r.as_slice().expect("row"))).collect())
            }
        }
    }

    /// Bagging: mean member probability. Boosting: member-weighted mean.
    /// Stacking: combiner scores clipped at zero and renormalized.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if self.task != Task::Classification {
            return Err(SpinexError::TaskMismatch { expected: "classification" });
        }
        check_query_shape(x, self.n_features)?;
        let k = self.n_classes;
        match self.kind {
            EnsembleKind::Bagging | EnsembleKind::Boosting => {
                let weights: Vec<f64> = match self.kind {
                    EnsembleKind::Bagging => vec![1.0; self.members.len()],
                    _ => self.member_weights.clone(),
                };
                let total: f64 = weights.iter().sum();
                let mut acc = Array2::zeros((x.nrows(), k));
                for (m, w) in self.members.iter().zip(&weights) {
                    acc.scaled_add(*w / total, &padded_proba(m, x, k)?);
                }
                Ok(acc)
            }
            EnsembleKind::Stacking => {
                let mut scores = self.combine(self.stacked_proba(x)?);
                for mut row in scores.rows_mut() {
                    row.mapv_inplace(|v| v.max(0.0));
                    let s = row.sum();
                    if s > 0.0 {
                        row /= s;
                    } else {
                        row.fill(1.0 / k as f64);
                    }
                }
                Ok(scores)
            }
        }
    }

    fn stacked_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let k = self.n_classes;
        let mut meta = Array2::zeros((x.nrows(), k * self.members.len()));
        for (j, m) in self.members.iter().enumerate() {
            meta.slice_mut(s![.., j * k..(j + 1) * k]).assign(&padded_proba(m, x, k)?);
        }
        Ok(meta)
    }

    fn combine(&self, meta: Array2<f64>) -> Array2<f64> {
        let coef = self.combiner.as_ref().expect("stacking combiner");
        with_intercept(meta.view()).dot(coef)
    }
}

impl Predictor for EnsembleModel {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Predictions> {
        match self.task {
            Task::Regression => self.predict_regression(x).map(Predictions::Values),
            Task::Classification => self.predict_class(x).map(Predictions::Labels),
        }
    }

    fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        EnsembleModel::predict_proba(self, x)
    }
}

/// Member probabilities widened to `k` columns (a member may have seen fewer classes).
fn padded_proba(m: &SpinexModel, x: ArrayView2<'_, f64>, k: usize) -> Result<Array2<f64>> {
    let p = m.predict_proba(x)?;
    if p.ncols() == k {
        return Ok(p);
    }
    let mut out = Array2::zeros((p.nrows(), k));
    out.slice_mut(s![.., ..p.ncols()]).assign(&p);
    Ok(out)
}

fn with_intercept(meta: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut a = Array2::ones((meta.nrows(), meta.ncols() + 1));
    a.slice_mut(s![.., 1..]).assign(&meta);
    a
}

pub fn fit_bagging(config: &SpinexConfig, d: &Dataset, params: &BaggingParams) -> Result<EnsembleModel> {
    if d.is_empty() {
        return Err(SpinexError::EmptyDataset);
    }
    if params.members == 0 {
        return Err(SpinexError::InvalidConfig("bagging needs at least one member".into()));
    }
    if !(params.sample_fraction > 0.0 && params.sample_fraction <= 1.0) {
        return Err(SpinexError::InvalidConfig(format!(
            "sample_fraction must be in (0, 1], got {}",
            params.sample_fraction
        )));
    }
    let n = d.n_samples();
    let sample_size = ((params.sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut members = Vec::with_capacity(params.members);
    for _ in 0..params.members {
        let rows: Vec<usize> = if params.deterministic_full_sample {
            (0..n).collect()
        } else {
            (0..sample_size).map(|_| rng.random_range(0..n)).collect()
        };
        members.push(SpinexModel::fit(config, &d.select_rows(&rows))?);
    }
    Ok(EnsembleModel {
        kind: EnsembleKind::Bagging,
        task: d.task(),
        member_weights: vec![1.0; members.len()],
        members,
        combiner: None,
        n_features: d.n_features(),
        n_classes: d.n_classes(),
    })
}

/// Adaptive reweighting (classification) or stagewise residual fitting (regression).
///
/// The first round always fits the unmodified data; later classification
/// rounds fit a resample drawn according to the current sample weights.
pub fn fit_boosting(config: &SpinexConfig, d: &Dataset, params: &BoostingParams) -> Result<EnsembleModel> {
    if d.is_empty() {
        return Err(SpinexError::EmptyDataset);
    }
    if params.rounds == 0 || !(params.learning_rate > 0.0) {
        return Err(SpinexError::InvalidConfig("boosting needs rounds >= 1 and learning_rate > 0".into()));
    }
    let (members, member_weights) = match d.targets() {
        Targets::Real(y) => boost_regression(config, d, y, params)?,
        Targets::Labels(y) => boost_classification(config, d, y, params)?,
    };
    Ok(EnsembleModel {
        kind: EnsembleKind::Boosting,
        task: d.task(),
        members,
        member_weights,
        combiner: None,
        n_features: d.n_features(),
        n_classes: d.n_classes(),
    })
}

fn boost_regression(
    config: &SpinexConfig,
    d: &Dataset,
    y: &[f64],
    params: &BoostingParams,
) -> Result<(Vec<SpinexModel>, Vec<f64>)> {
    let first = SpinexModel::fit(config, d)?;
    let mut running = first.predict_regression(d.features())?;
    let mut members = vec![first];
    let mut weights = vec![1.0];
    for _ in 1..params.rounds {
        let residuals: Vec<f64> = y.iter().zip(&running).map(|(t, f)| t - f).collect();
        let member = SpinexModel::fit(config, &d.with_targets(Targets::Real(residuals))?)?;
        for (f, p) in running.iter_mut().zip(member.predict_regression(d.features())?) {
            *f += params.learning_rate * p;
        }
        members.push(member);
        weights.push(params.learning_rate);
    }
    Ok((members, weights))
}

fn boost_classification(
    config: &SpinexConfig,
    d: &Dataset,
    y: &[usize],
    params: &BoostingParams,
) -> Result<(Vec<SpinexModel>, Vec<f64>)> {
    let n = y.len();
    let k = d.n_classes().max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut sample_weights = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut alphas = Vec::new();
    'rounds: for round in 0..params.rounds {
        let mut attempt = 0;
        let (member, misses, error) = loop {
            let member = if round == 0 && attempt == 0 {
                SpinexModel::fit(config, d)?
            } else {
                let dist = WeightedIndex::new(&sample_weights).expect("positive sample weights");
                let rows: Vec<usize> = (0..n).map(|_| dist.sample(&mut rng)).collect();
                SpinexModel::fit(config, &d.select_rows(&rows))?
            };
            let pred = member.predict_class(d.features())?;
            let misses: Vec<bool> = pred.iter().zip(y).map(|(p, t)| p != t).collect();
            let error: f64 = misses.iter().zip(&sample_weights).filter(|(m, _)| **m).map(|(_, w)| w).sum();
            if error < 1.0 - 1.0 / k as f64 {
                break (member, misses, error);
            }
            attempt += 1;
            if attempt > MAX_ROUND_RETRIES {
                if round == 0 {
                    return Err(SpinexError::DegenerateRound);
                }
                break 'rounds;
            }
        };
        let perfect = error <= 0.0;
        let error = error.max(MIN_ROUND_ERROR);
        let alpha = params.learning_rate * (((1.0 - error) / error) * (k as f64 - 1.0)).ln();
        members.push(member);
        alphas.push(alpha);
        if perfect {
            break;
        }
        for (w, miss) in sample_weights.iter_mut().zip(&misses) {
            if *miss {
                *w *= alpha.exp();
            }
        }
        let total: f64 = sample_weights.iter().sum();
        sample_weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok((members, alphas))
}

/// Out-of-fold base-model outputs: one column per regressor, or `K` probability
/// columns per classifier. Row `i` never depends on the target of row `i`.
pub fn out_of_fold_predictions(
    base_configs: &[SpinexConfig],
    d: &Dataset,
    folds: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if base_configs.is_empty() {
        return Err(SpinexError::InvalidConfig("stacking needs at least one base config".into()));
    }
    if folds < 2 || d.n_samples() < folds {
        return Err(SpinexError::TooFewRowsForFolds { rows: d.n_samples(), folds });
    }
    let width = match d.task() {
        Task::Regression => 1,
        Task::Classification => d.n_classes(),
    };
    let mut meta = Array2::zeros((d.n_samples(), width * base_configs.len()));
    for fold in kfold_split(d.n_samples(), folds, seed)? {
        let train = d.select_rows(&fold.train);
        let xt = d.features().select(Axis(0), &fold.test);
        for (j, cfg) in base_configs.iter().enumerate() {
            let m = SpinexModel::fit(cfg, &train)?;
            let out = match d.task() {
                Task::Regression => {
                    Array2::from_shape_vec((fold.test.len(), 1), m.predict_regression(xt.view())?).expect("one column")
                }
                Task::Classification => padded_proba(&m, xt.view(), width)?,
            };
            for (r, &i) in fold.test.iter().enumerate() {
                meta.slice_mut(s![i, j * width..(j + 1) * width]).assign(&out.row(r));
            }
        }
    }
    Ok(meta)
}

/// Least-squares combiner over out-of-fold base outputs; members are refit on all rows.
pub fn fit_stacking(base_configs: &[SpinexConfig], d: &Dataset, params: &StackingParams) -> Result<EnsembleModel> {
    let meta = out_of_fold_predictions(base_configs, d, params.folds, params.seed)?;
    let targets = match d.targets() {
        Targets::Real(y) => Array2::from_shape_vec((y.len(), 1), y.clone()).expect("one column"),
        Targets::Labels(y) => {
            let k = d.n_classes();
            Array2::from_shape_fn((y.len(), k), |(i, c)| if y[i] == c { 1.0 } else { 0.0 })
        }
    };
    let combiner = ridge_solve(with_intercept(meta.view()).view(), targets.view(), STACKING_RIDGE);
    let members = base_configs.iter().map(|c| SpinexModel::fit(c, d)).collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        kind: EnsembleKind::Stacking,
        task: d.task(),
        member_weights: vec![1.0; members.len()],
        members,
        combiner: Some(combiner),
        n_features: d.n_features(),
        n_classes: d.n_classes(),
    })
}
