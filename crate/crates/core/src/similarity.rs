//! Distances and neighbor weighting kernels.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinexError};

/// Floor applied to the reciprocal kernel's denominator.
pub const RECIPROCAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Manhattan,
    Euclidean,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manhattan" => Ok(Metric::Manhattan),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Distances from each query row (rows) to each reference row (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub metric: Metric,
}

impl DistanceMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i).to_slice().expect("standard layout")
    }
}

pub fn pairwise_distances(
    queries: ArrayView2<'_, f64>,
    refs: ArrayView2<'_, f64>,
    metric: Metric,
) -> Result<DistanceMatrix> {
    if queries.ncols() != refs.ncols() {
        return Err(SpinexError::DimensionMismatch { expected: refs.ncols(), actual: queries.ncols() });
    }
    let refs = refs.as_standard_layout();
    let mut values = Array2::zeros((queries.nrows(), refs.nrows()));
    Zip::from(values.axis_iter_mut(Axis(0))).and(queries.axis_iter(Axis(0))).par_for_each(|mut out, q| {
        let q = q.to_vec();
        for (o, r) in out.iter_mut().zip(refs.rows()) {
            *o = metric.distance(&q, r.as_slice().expect("standard layout"));
        }
    });
    Ok(DistanceMatrix { values, metric })
}

/// Nearest training rows for one query, closest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// First `len` neighbors with their weights recomputed by `reweigh`.
    pub fn prefix(&self, len: usize, reweigh: impl Fn(&[f64]) -> Vec<f64>) -> NeighborSet {
        let distances = self.distances[..len].to_vec();
        NeighborSet { indices: self.indices[..len].to_vec(), weights: reweigh(&distances), distances }
    }
}

#[inline]
fn by_distance_then_index(row: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b))
}

/// The `min(k, row.len())` smallest entries of `row` as (indices, distances), ascending.
/// Equal distances are ordered by lower index.
pub fn nearest(row: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    let k = k.min(row.len());
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut idx: Vec<usize> = (0..row.len()).collect();
    let cmp = by_distance_then_index(row);
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    let dist = idx.iter().map(|&i| row[i]).collect();
    (idx, dist)
}

/// Gaussian weights for already-selected distances; bandwidth is `kernel_width` times their mean.
pub fn gaussian_kernel(distances: &[f64], kernel_width: f64) -> Vec<f64> {
    if distances.is_empty() {
        return Vec::new();
    }
    let sigma = kernel_width * distances.iter().sum::<f64>() / distances.len() as f64;
    if sigma == 0.0 {
        return vec![1.0; distances.len()];
    }
    let two_sigma_sq = 2.0 * sigma * sigma;
    distances.iter().map(|d| (-(d * d) / two_sigma_sq).exp()).collect()
}

/// `1 / (d_r + threshold * decay^r)` for rank `r`, denominator floored at [`RECIPROCAL_FLOOR`].
pub fn reciprocal_kernel(distances: &[f64], threshold: f64, decay: f64) -> Vec<f64> {
    let mut offset = threshold;
    distances
        .iter()
        .map(|d| {
            let w = 1.0 / (d + offset).max(RECIPROCAL_FLOOR);
            offset *= decay;
            w
        })
        .collect()
}

pub fn gaussian_weights(row: &[f64], n_neighbors: usize, kernel_width: f64) -> Result<NeighborSet> {
    if !(kernel_width > 0.0) {
        return Err(SpinexError::NonPositiveKernelWidth(kernel_width));
    }
    let (indices, distances) = nearest(row, n_neighbors);
    let weights = gaussian_kernel(&distances, kernel_width);
    Ok(NeighborSet { indices, distances, weights })
}

pub fn reciprocal_weights(row: &[f64], n_neighbors: usize, distance_threshold: f64, decay: f64) -> NeighborSet {
    let (indices, distances) = nearest(row, n_neighbors);
    let weights = reciprocal_kernel(&distances, distance_threshold, decay);
    NeighborSet { indices, distances, weights }
}

/// Uniform weights over the selected neighbors.
pub fn uniform_weights(row: &[f64], n_neighbors: usize) -> NeighborSet {
    let (indices, distances) = nearest(row, n_neighbors);
    let weights = vec![1.0; indices.len()];
    NeighborSet { indices, distances, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn distance_examples() {
        let q = array![[0.0, 0.0], [1.0, 2.0]];
        let r = array![[1.0, 2.0], [3.0, 4.0]];
        let m = pairwise_distances(q.view(), r.view(), Metric::Manhattan).unwrap();
        assert_eq!(m.values, array![[3.0, 7.0], [0.0, 4.0]]);
        let e = pairwise_distances(q.view(), r.view(), Metric::Euclidean).unwrap();
        assert_eq!(e.values[[0, 1]], 5.0);
        assert_eq!(e.values[[1, 0]], 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let q = array![[0.0, 0.0]];
        let r = array![[1.0]];
        assert!(matches!(
            pairwise_distances(q.view(), r.view(), Metric::Manhattan),
            Err(SpinexError::DimensionMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn gaussian_examples() {
        let s = gaussian_weights(&[0.0, 3.0, 3.0], 3, 1.0).unwrap();
        assert_eq!(s.weights[0], 1.0);
        // sigma = mean(0, 3, 3) = 2
        assert!((s.weights[1] - (-9.0f64 / 8.0).exp()).abs() < 1e-15);

        // d = sigma gives exp(-1/2)
        let w = gaussian_kernel(&[2.0, 2.0], 1.0);
        assert!((w[0] - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert_eq!(w[0], w[1]);

        assert_eq!(gaussian_kernel(&[0.0, 0.0], 1.0), vec![1.0, 1.0]);
        assert!(matches!(gaussian_weights(&[1.0], 1, 0.0), Err(SpinexError::NonPositiveKernelWidth(_))));
    }

    #[test]
    fn reciprocal_examples() {
        let s = reciprocal_weights(&[0.0], 1, 0.05, 1.0);
        assert!((s.weights[0] - 20.0).abs() < 1e-12);
        let s = reciprocal_weights(&[0.5, 0.25], 2, 0.0, 0.9);
        assert_eq!(s.weights, vec![1.0 / 0.25, 1.0 / 0.5]);
        let s = reciprocal_weights(&[0.2, 0.1], 2, 0.05, 0.5);
        assert_eq!(s.indices, vec![1, 0]);
        assert!((s.weights[0] - 1.0 / 0.15).abs() < 1e-12);
        assert!((s.weights[1] - 1.0 / 0.225).abs() < 1e-12);
        // floored denominator
        let s = reciprocal_weights(&[0.0], 1, 0.0, 1.0);
        assert_eq!(s.weights[0], 1.0 / RECIPROCAL_FLOOR);
    }

    #[test]
    fn nearest_clamps_and_breaks_ties_by_index() {
        let (idx, d) = nearest(&[2.0, 1.0, 1.0, 0.5], 3);
        assert_eq!(idx, vec![3, 1, 2]);
        assert_eq!(d, vec![0.5, 1.0, 1.0]);
        let (idx, _) = nearest(&[2.0, 1.0], 10);
        assert_eq!(idx, vec![1, 0]);
        assert!(nearest(&[], 3).0.is_empty());
    }
}
