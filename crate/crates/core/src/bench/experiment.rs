//! Experiment manifests, the cross-validation loop and report assembly.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::cv::{kfold_split, stratified_kfold_split, Fold};
use crate::data::{self, check_health, column_means, fill_missing, Dataset, HealthReport, PreprocessConfig, Task};
use crate::ensemble::{self, BaggingParams, BoostingParams, StackingParams};
use crate::error::{Result, SpinexError};
use crate::evalrank::{self, MetricKind, MetricRecord, RankTable};
use crate::explain::{self, InteractionAggregation, InteractionMatrix};
use crate::model::{FittedModel, KnnBaseline, Predictions, Predictor};
use crate::predictor::{EnsembleMethod, SpinexConfig};
use crate::similarity::Metric;
use crate::synthgen::GenSpec;

/// Rows explained per dataset for the report's importance summary.
pub const EXPLAIN_ROWS: usize = 20;
/// Interaction matrices are only summarized up to this many features.
pub const EXPLAIN_MAX_INTERACTION_FEATURES: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Generator { name: String, generator: GenSpec },
    Csv { name: String, path: PathBuf, target: String, task: Task },
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Generator { name, .. } | DatasetSource::Csv { name, .. } => name,
        }
    }

    pub fn task(&self) -> Task {
        match self {
            DatasetSource::Generator { generator: GenSpec::Regression(_), .. } => Task::Regression,
            DatasetSource::Generator { generator: GenSpec::Classification(_), .. } => Task::Classification,
            DatasetSource::Csv { task, .. } => *task,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Generator { generator, .. } => Ok(generator.generate()?.dataset),
            DatasetSource::Csv { path, target, task, .. } => data::load_csv(path, target, *task),
        }
    }
}

/// Model recipe. `config` objects overlay the task defaults of [`SpinexConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Spinex {
        #[serde(default)]
        config: Value,
    },
    Bagging {
        #[serde(default)]
        config: Value,
        #[serde(default)]
        params: BaggingParams,
    },
    Boosting {
        #[serde(default)]
        config: Value,
        #[serde(default)]
        params: BoostingParams,
    },
    Stacking {
        #[serde(default)]
        config: Value,
        /// Base configs; defaults to the config with each weighting kernel.
        #[serde(default)]
        bases: Vec<Value>,
        #[serde(default)]
        params: StackingParams,
    },
    Knn {
        #[serde(default = "default_knn_k")]
        k: usize,
        /// Defaults to the task's default SPINEX metric.
        #[serde(default)]
        metric: Option<Metric>,
    },
}

fn default_knn_k() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, kind: ModelKind) -> Self {
        ModelSpec { name: name.into(), kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvSpec {
    Kfold(usize),
    StratifiedKfold(usize),
}

impl CvSpec {
    pub fn k(self) -> usize {
        match self {
            CvSpec::Kfold(k) | CvSpec::StratifiedKfold(k) => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub suite: String,
    pub datasets: Vec<DatasetSource>,
    pub models: Vec<ModelSpec>,
    pub cv: CvSpec,
    #[serde(default)]
    pub seed: u64,
    /// Summarize feature importances of a default model on every dataset.
    #[serde(default = "default_true")]
    pub explain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

impl ExperimentSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// The task shared by every dataset.
    pub fn validate(&self) -> Result<Task> {
        let bad = |m: String| Err(SpinexError::InvalidSpec(m));
        if self.datasets.is_empty() || self.models.is_empty() {
            return bad("an experiment needs at least one dataset and one model".into());
        }
        if self.cv.k() < 2 {
            return bad(format!("cross-validation needs k >= 2, got {}", self.cv.k()));
        }
        let names: BTreeSet<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        if names.len() != self.models.len() {
            return bad("model names must be unique".into());
        }
        let names: BTreeSet<&str> = self.datasets.iter().map(|d| d.name()).collect();
        if names.len() != self.datasets.len() {
            return bad("dataset names must be unique".into());
        }
        let task = self.datasets[0].task();
        if self.datasets.iter().any(|d| d.task() != task) {
            return bad("all datasets of an experiment must share one task".into());
        }
        if task == Task::Regression && matches!(self.cv, CvSpec::StratifiedKfold(_)) {
            return bad("stratified folds need a classification task".into());
        }
        for m in &self.models {
            m.resolve_config(task)?;
        }
        Ok(task)
    }
}

impl ModelSpec {
    fn config_value(&self) -> Option<&Value> {
        match &self.kind {
            ModelKind::Spinex { config }
            | ModelKind::Bagging { config, .. }
            | ModelKind::Boosting { config, .. }
            | ModelKind::Stacking { config, .. } => Some(config),
            ModelKind::Knn { .. } => None,
        }
    }

    fn resolve_config(&self, task: Task) -> Result<SpinexConfig> {
        match self.config_value() {
            Some(v) => overlay_config(v, task),
            None => Ok(SpinexConfig::default_for(task)),
        }
    }

    /// Fits the model on an already imputed training set.
    pub fn fit(&self, train: &Dataset) -> Result<FittedModel> {
        let task = train.task();
        let config = self.resolve_config(task)?;
        let base = SpinexConfig { ensemble_method: EnsembleMethod::None, ..config.clone() };
        Ok(match &self.kind {
            ModelKind::Spinex { .. } => FittedModel::fit(&config, train)?,
            ModelKind::Bagging { params, .. } => FittedModel::Ensemble(ensemble::fit_bagging(&base, train, params)?),
            ModelKind::Boosting { params, .. } => FittedModel::Ensemble(ensemble::fit_boosting(&base, train, params)?),
            ModelKind::Stacking { bases, params, .. } => {
                let bases = if bases.is_empty() {
                    ensemble::default_stacking_bases(&base)
                } else {
                    bases.iter().map(|b| overlay_config(b, task)).collect::<Result<Vec<_>>>()?
                };
                FittedModel::Ensemble(ensemble::fit_stacking(&bases, train, params)?)
            }
            ModelKind::Knn { k, metric } => {
                let metric = metric.unwrap_or(config.metric);
                let cleaned = data::preprocess(train, &PreprocessConfig::default())?;
                FittedModel::Knn(KnnBaseline::fit(*k, metric, &cleaned)?)
            }
        })
    }
}

fn overlay_config(v: &Value, task: Task) -> Result<SpinexConfig> {
    match v {
        Value::Null => Ok(SpinexConfig::default_for(task)),
        other => SpinexConfig::from_json_for_task(&other.to_string(), task),
    }
}

/// Train and test sets for one fold, with missing cells filled by training-fold means.
pub fn prepare_fold(d: &Dataset, fold: &Fold) -> Result<(Dataset, Dataset)> {
    let train = d.select_rows(&fold.train);
    let test = d.select_rows(&fold.test);
    if !d.has_missing() {
        return Ok((train, test));
    }
    let means = column_means(train.features())?;
    Ok((fill_with(&train, &means)?, fill_with(&test, &means)?))
}

fn fill_with(d: &Dataset, means: &[f64]) -> Result<Dataset> {
    let (mut x, y, names) = d.clone().into_parts();
    fill_missing(&mut x, means);
    Dataset::new(x, y, names)
}

fn impute_all(d: &Dataset) -> Result<Dataset> {
    if !d.has_missing() {
        return Ok(d.clone());
    }
    fill_with(d, &column_means(d.features())?)
}

/// Metrics of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub preprocess_time_s: f64,
    pub metrics: MetricRecord,
}

/// One model evaluated on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub dataset: String,
    pub folds: Vec<FoldResult>,
    pub aggregate: MetricRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetExplanation {
    pub feature_names: Vec<String>,
    pub n_instances: usize,
    pub importance: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactions: Option<InteractionMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub task: Task,
    pub n_samples: usize,
    pub n_features: usize,
    pub health: HealthReport,
    pub folds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<DatasetExplanation>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RankTables {
    pub accuracy_group: Option<RankTable>,
    pub cost_group: Option<RankTable>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub spec: ExperimentSpec,
    pub datasets: Vec<DatasetEntry>,
    pub cells: Vec<Cell>,
    pub rank_tables: RankTables,
    /// SHA-256 of the report with timing-derived fields removed.
    pub determinism_hash: String,
    pub wall_clock: WallClock,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Set when the run aborted; the report then holds only completed work.
    #[serde(default)]
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl BenchmarkReport {
    pub fn cell(&self, model: &str, dataset: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.model == model && c.dataset == dataset)
    }

    /// Recomputes the hash of the deterministic part of the report.
    pub fn compute_hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        strip_nondeterministic(&mut v);
        let canonical = serde_json::to_vec(&v)?;
        Ok(hex::encode(Sha256::digest(&canonical)))
    }
}

const TIMING_KEYS: [&str; 4] = ["train_time_s", "predict_time_s", "estimated_energy", "preprocess_time_s"];

fn strip_nondeterministic(v: &mut Value) {
    let Value::Object(root) = v else { return };
    root.remove("determinism_hash");
    root.remove("wall_clock");
    if let Some(Value::Object(spec)) = root.get_mut("spec") {
        spec.remove("output_dir");
    }
    if let Some(Value::Object(tables)) = root.get_mut("rank_tables") {
        tables.remove("cost_group");
    }
    if let Some(Value::Array(cells)) = root.get_mut("cells") {
        for cell in cells {
            if let Some(Value::Object(agg)) = cell.get_mut("aggregate") {
                TIMING_KEYS.iter().for_each(|k| drop(agg.remove(*k)));
            }
            if let Some(Value::Array(folds)) = cell.get_mut("folds") {
                for f in folds {
                    if let Value::Object(fold) = f {
                        fold.remove("preprocess_time_s");
                    }
                    if let Some(Value::Object(m)) = f.get_mut("metrics") {
                        TIMING_KEYS.iter().for_each(|k| drop(m.remove(*k)));
                    }
                }
            }
        }
    }
}

/// A finished or aborted run.
pub struct ExperimentOutcome {
    pub report: BenchmarkReport,
    pub error: Option<SpinexError>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchmarkReport> {
    let outcome = run_experiment_outcome(spec)?;
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(outcome.report),
    }
}

/// Runs the experiment, keeping completed work when a later step fails.
/// Spec validation errors are returned directly.
pub fn run_experiment_outcome(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let task = spec.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let mut report = BenchmarkReport {
        spec: spec.clone(),
        datasets: Vec::new(),
        cells: Vec::new(),
        rank_tables: RankTables::default(),
        determinism_hash: String::new(),
        wall_clock: WallClock { started_unix_s, elapsed_s: 0.0 },
        warnings: Vec::new(),
        partial: false,
        error: None,
    };
    let error = execute(spec, task, &mut report).err();
    if let Some(e) = &error {
        report.partial = true;
        report.error = Some(e.to_string());
    }
    report.wall_clock.elapsed_s = started.elapsed().as_secs_f64();
    report.determinism_hash = report.compute_hash()?;
    Ok(ExperimentOutcome { report, error })
}

struct LoadedDataset {
    data: Dataset,
    folds: Vec<Fold>,
}

fn execute(spec: &ExperimentSpec, task: Task, report: &mut BenchmarkReport) -> Result<()> {
    let mut loaded = Vec::with_capacity(spec.datasets.len());
    for src in &spec.datasets {
        let d = src.load()?;
        let (folds, warning) = split(&d, spec.cv, spec.seed)?;
        if let Some(w) = warning {
            report.warnings.push(format!("{}: {w}", src.name()));
        }
        let explanation = if spec.explain { Some(explain_dataset(&d)?) } else { None };
        report.datasets.push(DatasetEntry {
            name: src.name().to_owned(),
            task: d.task(),
            n_samples: d.n_samples(),
            n_features: d.n_features(),
            health: check_health(&d),
            folds: folds.len(),
            explanation,
        });
        loaded.push(LoadedDataset { data: d, folds });
    }

    let jobs: Vec<(usize, usize)> =
        (0..spec.datasets.len()).flat_map(|di| (0..spec.models.len()).map(move |mi| (di, mi))).collect();
    let results: Vec<Result<Cell>> =
        jobs.par_iter().map(|&(di, mi)| run_cell(&spec.models[mi], spec.datasets[di].name(), &loaded[di])).collect();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(cell) => report.cells.push(cell),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let aggregates: Vec<MetricRecord> = report.cells.iter().map(|c| c.aggregate.clone()).collect();
    let wanted: &[MetricKind] = match task {
        Task::Regression => &[MetricKind::Mae, MetricKind::R2],
        Task::Classification => &[MetricKind::Accuracy, MetricKind::Logloss, MetricKind::Auc],
    };
    let mut accuracy_metrics = Vec::new();
    for &m in wanted {
        if aggregates.iter().all(|a| a.get(m).is_some()) {
            accuracy_metrics.push((m, m.direction()));
        } else {
            report.warnings.push(format!("metric {} unavailable for some cells; left out of ranking", m.name()));
        }
    }
    if !accuracy_metrics.is_empty() {
        report.rank_tables.accuracy_group = Some(evalrank::rank_models(&aggregates, &accuracy_metrics)?);
    }
    let cost = [MetricKind::TotalTime, MetricKind::Energy].map(|m| (m, m.direction()));
    report.rank_tables.cost_group = Some(evalrank::rank_models(&aggregates, &cost)?);
    Ok(())
}

fn split(d: &Dataset, cv: CvSpec, seed: u64) -> Result<(Vec<Fold>, Option<String>)> {
    match cv {
        CvSpec::Kfold(k) => Ok((kfold_split(d.n_samples(), k, seed)?, None)),
        CvSpec::StratifiedKfold(k) => {
            let labels = d.targets().as_labels().ok_or(SpinexError::TaskMismatch { expected: "classification" })?;
            let s = stratified_kfold_split(labels, k, seed)?;
            Ok((s.folds, s.warning))
        }
    }
}

fn explain_dataset(d: &Dataset) -> Result<DatasetExplanation> {
    let full = impute_all(d)?;
    let model = crate::predictor::SpinexModel::fit(&SpinexConfig::default_for(d.task()), &full)?;
    let rows = EXPLAIN_ROWS.min(full.n_samples());
    let x = full.features().slice(s![..rows, ..]).to_owned();
    let importance = explain::global_feature_importance(&model, x.view())?;
    let interactions = if d.n_features() <= EXPLAIN_MAX_INTERACTION_FEATURES {
        Some(explain::global_interaction_effects(&model, x.view(), InteractionAggregation::Signed)?)
    } else {
        None
    };
    Ok(DatasetExplanation { feature_names: d.feature_names().to_vec(), n_instances: rows, importance, interactions })
}

fn run_cell(spec: &ModelSpec, dataset: &str, ds: &LoadedDataset) -> Result<Cell> {
    let size_mb = spec.fit(&impute_all(&ds.data)?)?.size_mb()?;
    let mut folds = Vec::with_capacity(ds.folds.len());
    for (i, fold) in ds.folds.iter().enumerate() {
        let t0 = Instant::now();
        let (train, test) = prepare_fold(&ds.data, fold)?;
        let preprocess_time_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let model = spec.fit(&train)?;
        let train_time_s = round_us(t1.elapsed().as_secs_f64());

        let mut metrics = MetricRecord {
            model_name: spec.name.clone(),
            dataset_name: dataset.to_owned(),
            train_time_s,
            model_size_mb: size_mb,
            ..Default::default()
        };
        let t2 = Instant::now();
        let predictions = model.predict(test.features())?;
        let proba = match test.task() {
            Task::Classification => Some(model.predict_proba(test.features())?),
            Task::Regression => None,
        };
        metrics.predict_time_s = round_us(t2.elapsed().as_secs_f64());
        metrics.estimated_energy = evalrank::estimated_energy(size_mb, metrics.train_time_s, metrics.predict_time_s);
        score_fold(&mut metrics, &test, &predictions, proba)?;
        folds.push(FoldResult {
            fold: i,
            n_train: fold.train.len(),
            n_test: fold.test.len(),
            preprocess_time_s: round_us(preprocess_time_s),
            metrics,
        });
    }
    let aggregate = aggregate(spec.name.clone(), dataset.to_owned(), &folds);
    Ok(Cell { model: spec.name.clone(), dataset: dataset.to_owned(), folds, aggregate })
}

fn round_us(seconds: f64) -> f64 {
    (seconds * 1e6).round() / 1e6
}

fn score_fold(
    metrics: &mut MetricRecord,
    test: &Dataset,
    predictions: &Predictions,
    proba: Option<Array2<f64>>,
) -> Result<()> {
    match (predictions, test.targets()) {
        (Predictions::Values(p), data::Targets::Real(y)) => {
            metrics.mae = Some(evalrank::mae(y, p)?);
            metrics.r2 = match evalrank::r2(y, p) {
                Err(SpinexError::ConstantActuals) => None,
                other => Some(other?),
            };
        }
        (Predictions::Labels(p), data::Targets::Labels(y)) => {
            metrics.accuracy = Some(evalrank::accuracy(y, p)?);
            let proba = proba.expect("classifier probabilities");
            let width = proba.ncols().max(y.iter().max().map_or(0, |m| m + 1));
            let mut padded = Array2::zeros((proba.nrows(), width));
            padded.slice_mut(s![.., ..proba.ncols()]).assign(&proba);
            metrics.logloss = Some(evalrank::logloss(y, padded.view())?);
            if width == 2 {
                let scores: Vec<f64> = padded.index_axis(Axis(1), 1).to_vec();
                metrics.auc = match evalrank::auc(y, &scores) {
                    Err(SpinexError::SingleClassPresent) => None,
                    other => Some(other?),
                };
            }
        }
        _ => return Err(SpinexError::TaskMismatch { expected: test.task().as_str() }),
    }
    Ok(())
}

/// Fold means; optional metrics average over the folds that report them.
fn aggregate(model: String, dataset: String, folds: &[FoldResult]) -> MetricRecord {
    let mean = |f: &dyn Fn(&MetricRecord) -> f64| folds.iter().map(|r| f(&r.metrics)).sum::<f64>() / folds.len() as f64;
    let opt_mean = |kind: MetricKind| {
        let vals: Vec<f64> = folds.iter().filter_map(|r| r.metrics.get(kind)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    MetricRecord {
        model_name: model,
        dataset_name: dataset,
        mae: opt_mean(MetricKind::Mae),
        r2: opt_mean(MetricKind::R2),
        accuracy: opt_mean(MetricKind::Accuracy),
        logloss: opt_mean(MetricKind::Logloss),
        auc: opt_mean(MetricKind::Auc),
        train_time_s: mean(&|r| r.train_time_s),
        predict_time_s: mean(&|r| r.predict_time_s),
        model_size_mb: mean(&|r| r.model_size_mb),
        estimated_energy: mean(&|r| r.estimated_energy),
    }
}
