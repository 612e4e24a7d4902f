//! Evaluation metrics and rank-sum model ranking.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinexError};

/// Probabilities are clamped to `[LOGLOSS_EPS, 1 - LOGLOSS_EPS]` before taking logs.
pub const LOGLOSS_EPS: f64 = 1e-15;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SpinexError::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(SpinexError::EmptyInput);
    }
    Ok(())
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    Ok(actual.iter().zip(predicted).map(|(a, p)| (p - a).abs()).sum::<f64>() / actual.len() as f64)
}

pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(SpinexError::ConstantActuals);
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (p - a).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn accuracy(actual: &[usize], predicted: &[usize]) -> Result<f64> {
    check_lengths(actual.len(), predicted.len())?;
    let hits = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    Ok(hits as f64 / actual.len() as f64)
}

/// Mean negative log-likelihood of the true class.
pub fn logloss(actual: &[usize], probabilities: ArrayView2<'_, f64>) -> Result<f64> {
    check_lengths(actual.len(), probabilities.nrows())?;
    let k = probabilities.ncols();
    let mut total = 0.0;
    for (i, (row, &y)) in probabilities.rows().into_iter().zip(actual).enumerate() {
        if y >= k {
            return Err(SpinexError::InvalidLabel { label: y, n_classes: k });
        }
        let sum: f64 = row.sum();
        if !(row.iter().all(|p| (0.0..=1.0).contains(p)) && (sum - 1.0).abs() <= 1e-6) {
            return Err(SpinexError::InvalidProbabilityRow(i));
        }
        total -= row[y].clamp(LOGLOSS_EPS, 1.0 - LOGLOSS_EPS).ln();
    }
    Ok(total / actual.len() as f64)
}

/// Area under the ROC curve for binary labels (1 = positive).
///
/// Thresholds are taken at distinct score values, so tied scores form one
/// diagonal segment of the curve; the result equals the Mann–Whitney statistic.
pub fn auc(actual: &[usize], scores: &[f64]) -> Result<f64> {
    check_lengths(actual.len(), scores.len())?;
    let positives = actual.iter().filter(|&&y| y == 1).count();
    let negatives = actual.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(SpinexError::SingleClassPresent);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if actual[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Ok(area / (positives as f64 * negatives as f64))
}

/// Model size (MB) times total time (s), in MB·s.
pub fn estimated_energy(model_size_mb: f64, train_time_s: f64, predict_time_s: f64) -> f64 {
    model_size_mb * (train_time_s + predict_time_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mae,
    R2,
    Accuracy,
    Logloss,
    Auc,
    #[serde(rename = "train_time_s")]
    TrainTime,
    #[serde(rename = "predict_time_s")]
    PredictTime,
    #[serde(rename = "total_time_s")]
    TotalTime,
    #[serde(rename = "model_size_mb")]
    ModelSize,
    #[serde(rename = "estimated_energy")]
    Energy,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Mae => "mae",
            MetricKind::R2 => "r2",
            MetricKind::Accuracy => "accuracy",
            MetricKind::Logloss => "logloss",
            MetricKind::Auc => "auc",
            MetricKind::TrainTime => "train_time_s",
            MetricKind::PredictTime => "predict_time_s",
            MetricKind::TotalTime => "total_time_s",
            MetricKind::ModelSize => "model_size_mb",
            MetricKind::Energy => "estimated_energy",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            MetricKind::R2 | MetricKind::Accuracy | MetricKind::Auc => Direction::HigherBetter,
            _ => Direction::LowerBetter,
        }
    }

    /// Whether the value depends on wall-clock measurements.
    pub fn is_timing(self) -> bool {
        matches!(self, MetricKind::TrainTime | MetricKind::PredictTime | MetricKind::TotalTime | MetricKind::Energy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerBetter,
    HigherBetter,
}

/// One model evaluated on one dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model_name: String,
    pub dataset_name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub logloss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc: Option<f64>,
    pub train_time_s: f64,
    pub predict_time_s: f64,
    pub model_size_mb: f64,
    pub estimated_energy: f64,
}

impl MetricRecord {
    pub fn get(&self, metric: MetricKind) -> Option<f64> {
        match metric {
            MetricKind::Mae => self.mae,
            MetricKind::R2 => self.r2,
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Logloss => self.logloss,
            MetricKind::Auc => self.auc,
            MetricKind::TrainTime => Some(self.train_time_s),
            MetricKind::PredictTime => Some(self.predict_time_s),
            MetricKind::TotalTime => Some(self.train_time_s + self.predict_time_s),
            MetricKind::ModelSize => Some(self.model_size_mb),
            MetricKind::Energy => Some(self.estimated_energy),
        }
    }

    pub fn set(&mut self, metric: MetricKind, value: f64) {
        match metric {
            MetricKind::Mae => self.mae = Some(value),
            MetricKind::R2 => self.r2 = Some(value),
            MetricKind::Accuracy => self.accuracy = Some(value),
            MetricKind::Logloss => self.logloss = Some(value),
            MetricKind::Auc => self.auc = Some(value),
            MetricKind::TrainTime => self.train_time_s = value,
            MetricKind::PredictTime => self.predict_time_s = value,
            MetricKind::ModelSize => self.model_size_mb = value,
            MetricKind::Energy => self.estimated_energy = value,
            MetricKind::TotalTime => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub model: String,
    /// Per-metric averages across datasets, aligned with [`RankTable::metrics`].
    pub averages: Vec<f64>,
    pub ranks: Vec<usize>,
    pub rank_sum: usize,
    pub overall_rank: usize,
}

/// Rank-sum ranking of models over one group of metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub metrics: Vec<MetricKind>,
    /// Sorted by overall rank, then model name.
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn row(&self, model: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

/// Competition ranks (ties share the lowest rank; the next rank skips).
pub fn min_ranks(values: &[f64], direction: Direction) -> Vec<usize> {
    let key = |v: f64| match direction {
        _ if v.is_nan() => f64::INFINITY,
        Direction::LowerBetter => v,
        Direction::HigherBetter => -v,
    };
    values.iter().map(|&v| 1 + values.iter().filter(|&&o| key(o) < key(v)).count()).collect()
}

/// Averages each metric per model over datasets, ranks models per metric,
/// sums the ranks and ranks the sums.
pub fn rank_models(records: &[MetricRecord], metrics: &[(MetricKind, Direction)]) -> Result<RankTable> {
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_name.as_str()).collect();
    let datasets: BTreeSet<&str> = records.iter().map(|r| r.dataset_name.as_str()).collect();
    let mut cells: BTreeMap<(&str, &str), &MetricRecord> = BTreeMap::new();
    for r in records {
        if cells.insert((r.model_name.as_str(), r.dataset_name.as_str()), r).is_some() {
            return Err(SpinexError::InvalidConfig(format!(
                "duplicate record for model `{}` on dataset `{}`",
                r.model_name, r.dataset_name
            )));
        }
    }
    let models: Vec<&str> = models.into_iter().collect();
    let mut averages = vec![vec![0.0; metrics.len()]; models.len()];
    for (mi, &model) in models.iter().enumerate() {
        for (k, &(metric, _)) in metrics.iter().enumerate() {
            let mut sum = 0.0;
            for &dataset in &datasets {
                let rec = cells
                    .get(&(model, dataset))
                    .ok_or_else(|| SpinexError::MissingCell { model: model.to_owned(), dataset: dataset.to_owned() })?;
                sum += rec.get(metric).ok_or_else(|| SpinexError::MissingMetric(metric.name().to_owned()))?;
            }
            averages[mi][k] = sum / datasets.len() as f64;
        }
    }
    let mut ranks = vec![vec![0usize; metrics.len()]; models.len()];
    for (k, &(_, direction)) in metrics.iter().enumerate() {
        let column: Vec<f64> = averages.iter().map(|a| a[k]).collect();
        for (mi, r) in min_ranks(&column, direction).into_iter().enumerate() {
            ranks[mi][k] = r;
        }
    }
    let sums: Vec<usize> = ranks.iter().map(|r| r.iter().sum()).collect();
    let overall = min_ranks(&sums.iter().map(|&s| s as f64).collect::<Vec<_>>(), Direction::LowerBetter);
    let mut rows: Vec<RankRow> = models
        .iter()
        .enumerate()
        .map(|(mi, m)| RankRow {
            model: (*m).to_owned(),
            averages: averages[mi].clone(),
            ranks: ranks[mi].clone(),
            rank_sum: sums[mi],
            overall_rank: overall[mi],
        })
        .collect();
    rows.sort_by(|a, b| a.overall_rank.cmp(&b.overall_rank).then_with(|| a.model.cmp(&b.model)));
    Ok(RankTable { metrics: metrics.iter().map(|m| m.0).collect(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(matches!(mae(&[], &[]), Err(SpinexError::EmptyInput)));
        assert!(matches!(mae(&[1.0], &[]), Err(SpinexError::LengthMismatch { .. })));
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert!(r2(&[1.0, 2.0, 3.0], &[3.0, 1.0, 9.0]).unwrap() < 0.0);
        assert!(matches!(r2(&[2.0, 2.0], &[1.0, 2.0]), Err(SpinexError::ConstantActuals)));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
    }

    #[test]
    fn logloss_examples() {
        let confident = logloss(&[1, 0], array![[0.0, 1.0], [1.0, 0.0]].view()).unwrap();
        assert!(confident < 1e-10);
        let uniform = logloss(&[0, 1], array![[0.5, 0.5], [0.5, 0.5]].view()).unwrap();
        assert!((uniform - std::f64::consts::LN_2).abs() < 1e-12);
        let wrong = logloss(&[0], array![[0.0, 1.0]].view()).unwrap();
        assert!((wrong - 34.538_776_394_910_684).abs() < 1e-9);
        assert!(matches!(logloss(&[0], array![[0.7, 0.7]].view()), Err(SpinexError::InvalidProbabilityRow(0))));
        assert!(matches!(logloss(&[2], array![[0.5, 0.5]].view()), Err(SpinexError::InvalidLabel { .. })));
    }

    #[test]
    fn logloss_drops_as_mass_moves_to_truth() {
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let p = 0.05 + 0.09 * step as f64;
            let l = logloss(&[1], array![[1.0 - p, p]].view()).unwrap();
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(auc(&[1, 1, 0, 0], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 0.0);
        // one positive tied with one negative: 3 wins + 0.5 tie over 4 pairs
        assert_eq!(auc(&[0, 0, 1, 1], &[0.1, 0.5, 0.5, 0.9]).unwrap(), 0.875);
        assert!(matches!(auc(&[1, 1], &[0.1, 0.2]), Err(SpinexError::SingleClassPresent)));
    }

    #[test]
    fn energy_examples() {
        assert_eq!(estimated_energy(1.0, 10.0, 0.0), 10.0);
        assert_eq!(estimated_energy(0.0, 3.0, 4.0), 0.0);
        assert!((estimated_energy(2.5, 1.2, 0.3) - 3.75).abs() < 1e-12);
    }

    #[test]
    fn min_rank_ties() {
        assert_eq!(min_ranks(&[0.5, 0.5, 0.7], Direction::LowerBetter), vec![1, 1, 3]);
        assert_eq!(min_ranks(&[0.5, 0.5, 0.7], Direction::HigherBetter), vec![2, 2, 1]);
        assert_eq!(min_ranks(&[f64::NAN, 1.0], Direction::HigherBetter), vec![2, 1]);
    }

    fn rec(model: &str, dataset: &str, mae: f64, r2: f64) -> MetricRecord {
        MetricRecord {
            model_name: model.into(),
            dataset_name: dataset.into(),
            mae: Some(mae),
            r2: Some(r2),
            ..Default::default()
        }
    }

    const GROUP: [(MetricKind, Direction); 2] =
        [(MetricKind::Mae, Direction::LowerBetter), (MetricKind::R2, Direction::HigherBetter)];

    #[test]
    fn single_model_ranks_first() {
        let t = rank_models(&[rec("a", "d", 1.0, 0.5)], &GROUP).unwrap();
        assert_eq!(t.rows[0].ranks, vec![1, 1]);
        assert_eq!(t.rows[0].overall_rank, 1);
    }

    #[test]
    fn missing_cell_errors() {
        let recs = [rec("a", "d1", 1.0, 0.5), rec("a", "d2", 1.0, 0.5), rec("b", "d1", 1.0, 0.5)];
        assert!(matches!(
            rank_models(&recs, &GROUP),
            Err(SpinexError::MissingCell { model, dataset }) if model == "b" && dataset == "d2"
        ));
    }
}
