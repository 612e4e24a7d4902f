//! Neighbor-based explanations.
//!
//! Every quantity here is a difference of predictions: the model's output on
//! an instance minus its output on the same instance with some features
//! replaced by their exclusion value (zero or the training mean). For
//! regressors the output is the predicted value; for classifiers it is the
//! probability of the class predicted for the unmodified instance.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Result, SpinexError};
use crate::model::{Prediction, Predictions};
use crate::predictor::{argmax, par_rows, ExcludeMethod, SpinexModel};

/// Upper bound on the number of subsets [`combination_impact`] will enumerate.
pub const COMBINATION_BUDGET: usize = 10_000;

/// Copy of `x` with the listed features set to their exclusion value.
pub fn exclude(x: &[f64], features: &[usize], method: ExcludeMethod, model: &SpinexModel) -> Result<Vec<f64>> {
    let n_features = model.n_features();
    if x.len() != n_features {
        return Err(SpinexError::DimensionMismatch { expected: n_features, actual: x.len() });
    }
    let mut out = x.to_vec();
    for &k in features {
        if k >= n_features {
            return Err(SpinexError::InvalidFeatureIndex { index: k, n_features });
        }
        out[k] = match method {
            ExcludeMethod::Zero => 0.0,
            ExcludeMethod::Mean => model.feature_means()[k],
        };
    }
    Ok(out)
}

/// Prediction quantity for one instance, with the class pinned for classifiers.
struct Instance<'a> {
    model: &'a SpinexModel,
    row: &'a [f64],
    class: usize,
    base: f64,
}

impl<'a> Instance<'a> {
    fn new(model: &'a SpinexModel, row: &'a [f64]) -> Self {
        match model.task() {
            Task::Regression => Instance { model, row, class: 0, base: model.value_row(row) },
            Task::Classification => {
                let p = model.proba_row(row);
                let class = argmax(&p);
                Instance { model, row, class, base: p[class] }
            }
        }
    }

    fn quantity(&self, row: &[f64]) -> f64 {
        match self.model.task() {
            Task::Regression => self.model.value_row(row),
            Task::Classification => self.model.proba_row(row)[self.class],
        }
    }

    /// `base - quantity(x with features excluded)`.
    fn drop(&self, features: &[usize]) -> f64 {
        let method = self.model.config().exclude_method;
        let excluded = exclude(self.row, features, method, self.model).expect("indices validated by caller");
        self.base - self.quantity(&excluded)
    }

    fn contributions(&self) -> Vec<f64> {
        (0..self.model.n_features()).map(|k| self.drop(&[k])).collect()
    }

    fn interactions(&self, contributions: &[f64]) -> Array2<f64> {
        let d = contributions.len();
        let mut m = Array2::zeros((d, d));
        for k in 0..d {
            for l in (k + 1)..d {
                let v = contributions[k] + contributions[l] - self.drop(&[k, l]);
                m[[k, l]] = v;
                m[[l, k]] = v;
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionVector {
    pub instance_index: usize,
    pub values: Vec<f64>,
}

/// Pairwise interaction effects `C_k + C_l - C_kl`; symmetric with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub values: Array2<f64>,
}

impl InteractionMatrix {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[[k, l]]
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// How per-instance interactions are pooled across a query set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionAggregation {
    #[default]
    Signed,
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationEntry {
    pub features: Vec<usize>,
    pub impact: f64,
}

/// Feature subsets with their mean exclusion impact, largest `|impact|` first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationImpact {
    pub entries: Vec<CombinationEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub instance_index: usize,
    pub contributions: ContributionVector,
    pub interactions: InteractionMatrix,
    pub neighbor_indices: Vec<usize>,
    pub neighbor_distances: Vec<f64>,
    pub neighbor_weights: Vec<f64>,
    pub prediction: Prediction,
}

fn rows_of(x: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn instance_row(m: &SpinexModel, x: ArrayView2<'_, f64>, instance: usize) -> Result<Vec<f64>> {
    if instance >= x.nrows() {
        return Err(SpinexError::IndexOutOfRange { index: instance, len: x.nrows() });
    }
    let row = x.row(instance).to_vec();
    m.check_query(ArrayView2::from_shape((1, row.len()), &row).expect("single row")).map_err(|e| match e {
        SpinexError::MissingInQuery(_) => SpinexError::MissingInQuery(instance),
        other => other,
    })?;
    Ok(row)
}

fn prediction_of(m: &SpinexModel, row: &[f64]) -> Prediction {
    match m.task() {
        Task::Regression => Prediction::Value(m.value_row(row)),
        Task::Classification => Prediction::Label(argmax(&m.proba_row(row))),
    }
}

pub fn feature_contributions(m: &SpinexModel, x: ArrayView2<'_, f64>) -> Result<Vec<ContributionVector>> {
    m.check_query(x)?;
    let values = par_rows(x, |row| Instance::new(m, row).contributions());
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(instance_index, values)| ContributionVector { instance_index, values })
        .collect())
}

pub fn interaction_effects(m: &SpinexModel, x: ArrayView2<'_, f64>) -> Result<Vec<InteractionMatrix>> {
    m.check_query(x)?;
    Ok(par_rows(x, |row| {
        let inst = Instance::new(m, row);
        InteractionMatrix { values: inst.interactions(&inst.contributions()) }
    }))
}

/// Mean absolute contribution of each feature over the query rows.
pub fn global_feature_importance(m: &SpinexModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if x.nrows() == 0 {
        return Err(SpinexError::EmptyQuerySet);
    }
    let contributions = feature_contributions(m, x)?;
    Ok(mean_abs(&contributions, m.n_features()))
}

fn mean_abs(contributions: &[ContributionVector], d: usize) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    for c in contributions {
        for (a, v) in acc.iter_mut().zip(&c.values) {
            *a += v.abs();
        }
    }
    let n = contributions.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Interaction matrices averaged over the query rows.
pub fn global_interaction_effects(
    m: &SpinexModel,
    x: ArrayView2<'_, f64>,
    aggregation: InteractionAggregation,
) -> Result<InteractionMatrix> {
    if x.nrows() == 0 {
        return Err(SpinexError::EmptyQuerySet);
    }
    let per_row = interaction_effects(m, x)?;
    Ok(pool_interactions(&per_row, m.n_features(), aggregation))
}

fn pool_interactions(
    per_row: &[InteractionMatrix],
    d: usize,
    aggregation: InteractionAggregation,
) -> InteractionMatrix {
    let mut acc = Array2::zeros((d, d));
    for im in per_row {
        match aggregation {
            InteractionAggregation::Signed => acc += &im.values,
            InteractionAggregation::Absolute => acc += &im.values.mapv(f64::abs),
        }
    }
    acc /= per_row.len() as f64;
    InteractionMatrix { values: acc }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// All subsets of `0..d` with sizes `1..=max_size`, by size then lexicographically.
pub fn feature_subsets(d: usize, max_size: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, d: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            extend(j + 1, d, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=max_size.min(d) {
        extend(0, d, size, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

/// Mean impact of excluding each feature subset of size up to `max_size`.
pub fn combination_impact(m: &SpinexModel, x: ArrayView2<'_, f64>, max_size: usize) -> Result<CombinationImpact> {
    let d = m.n_features();
    if max_size == 0 || max_size > d {
        return Err(SpinexError::InvalidConfig(format!("max_size must be in 1..={d}, got {max_size}")));
    }
    let count = (1..=max_size).fold(0usize, |acc, s| acc.saturating_add(binomial(d, s)));
    if count > COMBINATION_BUDGET {
        return Err(SpinexError::CombinationBudgetExceeded { count, budget: COMBINATION_BUDGET });
    }
    if x.nrows() == 0 {
        return Err(SpinexError::EmptyQuerySet);
    }
    m.check_query(x)?;
    let rows = rows_of(x);
    let instances: Vec<Instance<'_>> = rows.iter().map(|r| Instance::new(m, r)).collect();
    let n = instances.len() as f64;
    let mut entries: Vec<CombinationEntry> = feature_subsets(d, max_size)
        .into_par_iter()
        .map(|features| {
            let impact = instances.iter().map(|inst| inst.drop(&features)).sum::<f64>() / n;
            CombinationEntry { features, impact }
        })
        .collect();
    entries.sort_by(|a, b| b.impact.abs().total_cmp(&a.impact.abs()).then_with(|| a.features.cmp(&b.features)));
    Ok(CombinationImpact { entries })
}

pub fn local_explanation(m: &SpinexModel, x: ArrayView2<'_, f64>, instance: usize) -> Result<LocalExplanation> {
    let row = instance_row(m, x, instance)?;
    let inst = Instance::new(m, &row);
    let contributions = inst.contributions();
    let interactions = InteractionMatrix { values: inst.interactions(&contributions) };
    let ns = m.neighbors(&row);
    Ok(LocalExplanation {
        instance_index: instance,
        contributions: ContributionVector { instance_index: instance, values: contributions },
        interactions,
        neighbor_indices: ns.indices,
        neighbor_distances: ns.distances,
        neighbor_weights: ns.weights,
        prediction: prediction_of(m, &row),
    })
}

/// Prediction from the nearest `t + 1` neighbors, for each `t` up to the neighbor count.
pub fn prediction_change_trace(m: &SpinexModel, x: ArrayView2<'_, f64>, instance: usize) -> Result<Vec<Prediction>> {
    let row = instance_row(m, x, instance)?;
    let ns = m.neighbors(&row);
    Ok((1..=ns.len())
        .map(|t| {
            let prefix = ns.prefix(t, |d| m.config().weigh(d));
            match m.task() {
                Task::Regression => Prediction::Value(m.value_from(&prefix)),
                Task::Classification => Prediction::Label(argmax(&m.proba_from(&prefix))),
            }
        })
        .collect())
}

/// Predictions over a Cartesian grid of values for 1–3 features of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeGrid {
    pub features: Vec<usize>,
    /// Grid coordinates per feature.
    pub axes: Vec<Vec<f64>>,
    /// Row-major over `axes` (last feature varies fastest).
    pub predictions: Predictions,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn local_changes_grid(
    m: &SpinexModel,
    x: ArrayView2<'_, f64>,
    instance: usize,
    features: &[usize],
    grid_size: usize,
    ranges: Option<&[(f64, f64)]>,
) -> Result<ChangeGrid> {
    let d = m.n_features();
    if features.is_empty() || features.len() > 3 {
        return Err(SpinexError::InvalidConfig(format!("1 to 3 features required, got {}", features.len())));
    }
    if let Some(&k) = features.iter().find(|&&k| k >= d) {
        return Err(SpinexError::IndexOutOfRange { index: k, len: d });
    }
    if (1..features.len()).any(|i| features[..i].contains(&features[i])) {
        return Err(SpinexError::InvalidConfig("grid features must be distinct".into()));
    }
    if grid_size == 0 {
        return Err(SpinexError::InvalidConfig("grid_size must be at least 1".into()));
    }
    if let Some(r) = ranges {
        if r.len() != features.len() {
            return Err(SpinexError::LengthMismatch { left: features.len(), right: r.len() });
        }
    }
    let row = instance_row(m, x, instance)?;
    let mut axes = Vec::with_capacity(features.len());
    for (i, &k) in features.iter().enumerate() {
        let (lo, hi) = ranges.map_or_else(|| m.feature_range(k), |r| r[i]);
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SpinexError::EmptyRange { lo, hi });
        }
        axes.push(linspace(lo, hi, grid_size));
    }
    let cells = grid_size.pow(features.len() as u32);
    let mut grid = Array2::zeros((cells, d));
    for c in 0..cells {
        let mut q = row.clone();
        let mut rem = c;
        for (i, &k) in features.iter().enumerate().rev() {
            q[k] = axes[i][rem % grid_size];
            rem /= grid_size;
        }
        grid.row_mut(c).assign(&ndarray::ArrayView1::from(&q));
    }
    let predictions = match m.task() {
        Task::Regression => Predictions::Values(m.predict_regression(grid.view())?),
        Task::Classification => Predictions::Labels(m.predict_class(grid.view())?),
    };
    Ok(ChangeGrid { features: features.to_vec(), axes, predictions })
}

/// How many query rows list each training row among their neighbors.
pub fn neighbor_counts(m: &SpinexModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    m.check_query(x)?;
    let mut counts = vec![0usize; m.n_train()];
    for ns in par_rows(x, |row| m.neighbors(row)) {
        for i in ns.indices {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Everything the `explain` command reports for one model and query set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub feature_names: Vec<String>,
    pub n_instances: usize,
    pub contributions: Vec<ContributionVector>,
    pub global_importance: Vec<f64>,
    pub mean_interactions: InteractionMatrix,
    pub mean_abs_interactions: InteractionMatrix,
    pub neighbor_counts: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub combinations: Option<CombinationImpact>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub local: Option<LocalExplanation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prediction_trace: Option<Vec<Prediction>>,
}

pub fn explanation_report(
    m: &SpinexModel,
    x: ArrayView2<'_, f64>,
    instance: Option<usize>,
    combinations: Option<usize>,
) -> Result<ExplanationReport> {
    if x.nrows() == 0 {
        return Err(SpinexError::EmptyQuerySet);
    }
    let contributions = feature_contributions(m, x)?;
    let per_row = interaction_effects(m, x)?;
    let d = m.n_features();
    Ok(ExplanationReport {
        feature_names: m.feature_names().to_vec(),
        n_instances: x.nrows(),
        global_importance: mean_abs(&contributions, d),
        contributions,
        mean_interactions: pool_interactions(&per_row, d, InteractionAggregation::Signed),
        mean_abs_interactions: pool_interactions(&per_row, d, InteractionAggregation::Absolute),
        neighbor_counts: neighbor_counts(m, x)?,
        combinations: combinations.map(|s| combination_impact(m, x, s)).transpose()?,
        local: instance.map(|i| local_explanation(m, x, i)).transpose()?,
        prediction_trace: instance.map(|i| prediction_change_trace(m, x, i)).transpose()?,
    })
}
