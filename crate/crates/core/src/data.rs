//! Datasets, CSV ingestion and preprocessing.
//!
//! Missing values are carried as `NaN` in memory. On disk an empty cell or a
//! literal `NaN` marks a missing value.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinexError};

/// Learning task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// Target vector: real values for regression, class labels for classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Real(Vec<f64>),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Real(_) => Task::Regression,
            Targets::Labels(_) => Task::Classification,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Targets::Real(v) => Some(v),
            Targets::Labels(_) => None,
        }
    }

    pub fn as_labels(&self) -> Option<&[usize]> {
        match self {
            Targets::Labels(v) => Some(v),
            Targets::Real(_) => None,
        }
    }

    /// Targets at the given row indices, in that order.
    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Real(v) => Targets::Real(rows.iter().map(|&i| v[i]).collect()),
            Targets::Labels(v) => Targets::Labels(rows.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Number of classes, `max label + 1`; zero for regression targets.
    pub fn n_classes(&self) -> usize {
        match self {
            Targets::Labels(v) => v.iter().max().map_or(0, |&m| m + 1),
            Targets::Real(_) => 0,
        }
    }
}

/// Feature matrix plus targets and column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Targets,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Targets, feature_names: Vec<String>) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(SpinexError::InvalidDataset(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(SpinexError::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        Ok(Dataset { features: standard(features), targets, feature_names })
    }

    /// Builds a dataset with generated names `x0, x1, …`.
    pub fn from_arrays(features: Array2<f64>, targets: Targets) -> Result<Self> {
        let names = default_feature_names(features.ncols());
        Dataset::new(features, targets, names)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.targets.n_classes()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples() == 0
    }

    pub fn has_missing(&self) -> bool {
        self.features.iter().any(|v| v.is_nan())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: standard(self.features.select(Axis(0), rows)),
            targets: self.targets.select(rows),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            features: standard(self.features.select(Axis(1), cols)),
            targets: self.targets.clone(),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
        }
    }

    /// Same features and names with a different target vector.
    pub fn with_targets(&self, targets: Targets) -> Result<Dataset> {
        Dataset::new(self.features.clone(), targets, self.feature_names.clone())
    }

    pub fn into_parts(self) -> (Array2<f64>, Targets, Vec<String>) {
        (self.features, self.targets, self.feature_names)
    }
}

/// Row-major copy unless the array already is; row slices rely on it.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

pub fn default_feature_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("x{j}")).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingDataMethod {
    #[default]
    MeanImputation,
    Deletion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMethod {
    #[default]
    ZScoreOutlierHandling,
    IqrOutlierHandling,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub missing_data_method: MissingDataMethod,
    pub outlier_handling_method: OutlierMethod,
}

impl PreprocessConfig {
    /// Imputation only, no outlier filtering.
    pub fn passthrough() -> Self {
        PreprocessConfig {
            missing_data_method: MissingDataMethod::MeanImputation,
            outlier_handling_method: OutlierMethod::None,
        }
    }
}

/// Imputes (or deletes) missing values, then filters outliers.
pub fn preprocess(d: &Dataset, cfg: &PreprocessConfig) -> Result<Dataset> {
    let imputed = impute_missing(d, cfg.missing_data_method)?;
    handle_outliers(&imputed, cfg.outlier_handling_method)
}

fn parse_cell(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    s.parse::<f64>().ok()
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| SpinexError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file))
}

/// Reads a CSV with a header row, splitting off `target_column` as the target.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header: Vec<String> = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.iter().map(str::to_owned).collect(),
        Ok(_) => return Err(SpinexError::EmptyFile),
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
        Err(_) => return Err(SpinexError::EmptyFile),
    };
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| SpinexError::MissingTargetColumn(target_column.to_owned()))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != target_idx).collect();

    let mut values = Vec::new();
    let mut real_targets = Vec::new();
    let mut labels = Vec::new();
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for &c in &feature_cols {
            let raw = record.get(c).unwrap_or("");
            let v =
                parse_cell(raw).ok_or_else(|| SpinexError::UnparseableCell { row, col: c, value: raw.to_owned() })?;
            values.push(v);
        }
        let raw = record.get(target_idx).unwrap_or("");
        let bad = || SpinexError::UnparseableCell { row, col: target_idx, value: raw.to_owned() };
        let t = raw.trim().parse::<f64>().map_err(|_| bad())?;
        match task {
            Task::Regression => {
                if !t.is_finite() {
                    return Err(bad());
                }
                real_targets.push(t)
            }
            Task::Classification => {
                if !(t >= 0.0 && t.fract() == 0.0 && t < u32::MAX as f64) {
                    return Err(bad());
                }
                labels.push(t as usize)
            }
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(SpinexError::EmptyFile);
    }
    let features = Array2::from_shape_vec((n_rows, feature_cols.len()), values).expect("row width fixed by header");
    let targets = match task {
        Task::Regression => Targets::Real(real_targets),
        Task::Classification => {
            let present: BTreeSet<usize> = labels.iter().copied().collect();
            let k = present.len();
            if present.iter().copied().ne(0..k) {
                return Err(SpinexError::InvalidDataset(format!(
                    "class labels must be contiguous from 0, found {present:?}"
                )));
            }
            Targets::Labels(labels)
        }
    };
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::new(features, targets, names)
}

/// Reads the named feature columns (in the given order) from a CSV; other columns are ignored.
pub fn load_query_csv(path: impl AsRef<Path>, feature_names: &[String]) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers().map_err(|_| SpinexError::EmptyFile)?.iter().map(str::to_owned).collect();
    let cols = feature_names
        .iter()
        .map(|name| header.iter().position(|h| h == name).ok_or_else(|| SpinexError::MissingColumn(name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for &c in &cols {
            let raw = record.get(c).unwrap_or("");
            values.push(parse_cell(raw).ok_or_else(|| SpinexError::UnparseableCell {
                row,
                col: c,
                value: raw.to_owned(),
            })?);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(SpinexError::EmptyFile);
    }
    Ok(Array2::from_shape_vec((n_rows, cols.len()), values).expect("row width fixed by header"))
}

/// Writes the dataset with a trailing `target` column, optionally preceded by a `#` comment line.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| SpinexError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| SpinexError::io(path, e);
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(io)?;
    }
    writeln!(out, "{},target", d.feature_names().join(",")).map_err(io)?;
    for (i, row) in d.features().rows().into_iter().enumerate() {
        let mut line = row.iter().map(|v| format_value(*v)).collect::<Vec<_>>().join(",");
        line.push(',');
        match d.targets() {
            Targets::Real(y) => line.push_str(&format_value(y[i])),
            Targets::Labels(y) => line.push_str(&y[i].to_string()),
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        // shortest representation that round-trips
        format!("{v:?}")
    }
}

/// Per-column means over non-missing entries.
pub fn column_means(features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    features
        .columns()
        .into_iter()
        .enumerate()
        .map(|(j, col)| {
            let (sum, count) = col.iter().filter(|v| !v.is_nan()).fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                Err(SpinexError::AllMissingColumn(j))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

/// Replaces every `NaN` in column `j` with `fill[j]`.
pub fn fill_missing(features: &mut Array2<f64>, fill: &[f64]) {
    for (mut col, &m) in features.columns_mut().into_iter().zip(fill) {
        col.mapv_inplace(|v| if v.is_nan() { m } else { v });
    }
}

pub fn impute_missing(d: &Dataset, method: MissingDataMethod) -> Result<Dataset> {
    if !d.has_missing() {
        return Ok(d.clone());
    }
    match method {
        MissingDataMethod::MeanImputation => {
            let means = column_means(d.features())?;
            let mut features = d.features.clone();
            fill_missing(&mut features, &means);
            Dataset::new(features, d.targets.clone(), d.feature_names.clone())
        }
        MissingDataMethod::Deletion => {
            let keep: Vec<usize> = d
                .features
                .rows()
                .into_iter()
                .enumerate()
                .filter(|(_, r)| !r.iter().any(|v| v.is_nan()))
                .map(|(i, _)| i)
                .collect();
            Ok(d.select_rows(&keep))
        }
    }
}

/// Quantile by linear interpolation between order statistics of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Rows flagged as outliers by `method`.
pub fn outlier_rows(features: ArrayView2<'_, f64>, method: OutlierMethod) -> Vec<bool> {
    let n = features.nrows();
    let mut flagged = vec![false; n];
    if n == 0 {
        return flagged;
    }
    for col in features.columns() {
        match method {
            OutlierMethod::None => return flagged,
            OutlierMethod::ZScoreOutlierHandling => {
                let mean = col.sum() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let std = var.sqrt();
                if std > 0.0 {
                    for (f, v) in flagged.iter_mut().zip(col) {
                        *f |= (v - mean).abs() / std > 3.0;
                    }
                }
            }
            OutlierMethod::IqrOutlierHandling => {
                let mut sorted = col.to_vec();
                sorted.sort_by(f64::total_cmp);
                let q1 = quantile_sorted(&sorted, 0.25);
                let q3 = quantile_sorted(&sorted, 0.75);
                let iqr = q3 - q1;
                let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
                for (f, v) in flagged.iter_mut().zip(col) {
                    *f |= *v < lo || *v > hi;
                }
            }
        }
    }
    flagged
}

/// Drops rows whose features are outliers. Targets are never inspected.
pub fn handle_outliers(d: &Dataset, method: OutlierMethod) -> Result<Dataset> {
    if method == OutlierMethod::None {
        return Ok(d.clone());
    }
    if d.has_missing() {
        return Err(SpinexError::InvalidDataset("outlier filtering requires imputed data".into()));
    }
    let flagged = outlier_rows(d.features(), method);
    let keep: Vec<usize> = (0..d.n_samples()).filter(|&i| !flagged[i]).collect();
    if keep.is_empty() && d.n_samples() > 0 {
        return Err(SpinexError::AllRowsRemoved);
    }
    if keep.len() == d.n_samples() {
        return Ok(d.clone());
    }
    Ok(d.select_rows(&keep))
}

/// Observations-per-feature checks used to judge whether a dataset is large enough.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub obs_per_feature: f64,
    pub cases_per_feature: f64,
    pub obs_feature_ratio: f64,
    /// At least 10 observations per feature.
    pub rule_10_pass: bool,
    /// At least 23 cases per feature.
    pub rule_23_pass: bool,
    /// Observation/feature ratio of at least 5.
    pub rule_ratio_pass: bool,
}

pub fn check_health(d: &Dataset) -> HealthReport {
    let ratio = if d.n_features() == 0 { 0.0 } else { d.n_samples() as f64 / d.n_features() as f64 };
    HealthReport {
        obs_per_feature: ratio,
        cases_per_feature: ratio,
        obs_feature_ratio: ratio,
        rule_10_pass: ratio >= 10.0,
        rule_23_pass: ratio >= 23.0,
        rule_ratio_pass: ratio >= 5.0,
    }
}
