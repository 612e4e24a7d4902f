//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinex_core::bench::{
    kfold_split, prepare_fold, run_experiment, stratified_kfold_split, CvSpec, DatasetSource, ExperimentSpec, Fold,
    ModelKind, ModelSpec,
};
use spinex_core::evalrank::{self, Direction, MetricKind, MetricRecord};
use spinex_core::explain;
use spinex_core::synthgen::{
    classification_suite_a, classification_suite_b, gen_classification, gen_regression, regression_suite, GenSpec,
    RegressionFamily, RegressionGenSpec,
};
use spinex_core::{
    Dataset, ExcludeMethod, Metric, PreprocessConfig, SpinexConfig, SpinexModel, Targets, Task, Weighting,
};

const KNN_REGRESSION_TOL: f64 = 1e-12;
const KNN_BUDGET: Duration = Duration::from_secs(10);
const EXPLAIN_TOL: f64 = 1e-12;
const EXPLAIN_BUDGET: Duration = Duration::from_secs(30);
const GENERATOR_TOL: f64 = 1e-9;
const GENERATOR_BUDGET: Duration = Duration::from_secs(60);
const METRIC_TOL: f64 = 1e-12;
const SOFT_R2_FLOOR: f64 = 0.80;
const SOFT_MAE_RATIO: f64 = 1.05;
const BENCH_BUDGET: Duration = Duration::from_secs(300);

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(took)
}

fn passthrough(task: Task) -> SpinexConfig {
    SpinexConfig { preprocess: PreprocessConfig::passthrough(), ..SpinexConfig::default_for(task) }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.random_range(-5.0..5.0))
}

fn brute_force_neighbors(train: &Array2<f64>, q: &[f64], k: usize, metric: Metric) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = train
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let d = match metric {
                Metric::Manhattan => r.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
                Metric::Euclidean => r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            };
            (d, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.iter().take(k).map(|s| s.1).collect()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut reg_preds, mut cls_preds, mut worst) = (0usize, 0usize, 0.0f64);
    for case in 0..20 {
        let n = rng.random_range(20..=300);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(1..=15);
        let metric = if case % 2 == 0 { Metric::Manhattan } else { Metric::Euclidean };
        let x = random_matrix(&mut rng, n, d);
        let q = random_matrix(&mut rng, 40, d);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();

        let cfg =
            SpinexConfig { n_neighbors: k, metric, weighting: Weighting::Uniform, ..passthrough(Task::Regression) };
        let reg = SpinexModel::fit(&cfg, &Dataset::from_arrays(x.clone(), Targets::Real(y.clone())).unwrap()).unwrap();
        let cls =
            SpinexModel::fit(&cfg, &Dataset::from_arrays(x.clone(), Targets::Labels(labels.clone())).unwrap()).unwrap();
        let got_reg = reg.predict_regression(q.view()).unwrap();
        let got_cls = cls.predict_class(q.view()).unwrap();
        for (i, row) in q.rows().into_iter().enumerate() {
            let nb = brute_force_neighbors(&x, row.as_slice().unwrap(), k.min(n), metric);
            let mean = nb.iter().map(|&j| y[j]).sum::<f64>() / nb.len() as f64;
            worst = worst.max((mean - got_reg[i]).abs());
            let mut votes = [0usize; 3];
            nb.iter().for_each(|&j| votes[labels[j]] += 1);
            let best = (0..3).fold(0, |b, c| if votes[c] > votes[b] { c } else { b });
            ensure(best == got_cls[i], || format!("case {case} row {i}: class {} vs oracle {best}", got_cls[i]))?;
            reg_preds += 1;
            cls_preds += 1;
        }
    }
    ensure(worst <= KNN_REGRESSION_TOL, || format!("max regression deviation {worst:e}"))?;
    let took = within_budget(start, KNN_BUDGET)?;
    Ok(format!("{reg_preds} regression + {cls_preds} classification predictions; max |Δ| {worst:.1e}; {took:.2?}"))
}

/// The quantity explanations are differences of: predicted value, or the
/// probability of a fixed class.
fn output(m: &SpinexModel, row: &[f64], class: Option<usize>) -> f64 {
    let q = Array2::from_shape_vec((1, row.len()), row.to_vec()).unwrap();
    match class {
        None => m.predict_regression(q.view()).unwrap()[0],
        Some(c) => m.predict_proba(q.view()).unwrap()[[0, c]],
    }
}

fn excluded(m: &SpinexModel, row: &[f64], features: &[usize]) -> Vec<f64> {
    let mut out = row.to_vec();
    for &k in features {
        out[k] = match m.config().exclude_method {
            ExcludeMethod::Zero => 0.0,
            ExcludeMethod::Mean => m.feature_means()[k],
        };
    }
    out
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut checked, mut worst) = (0usize, 0.0f64);
    let mut note = |delta: f64| {
        worst = worst.max(delta);
        checked += 1;
    };
    for case in 0..10 {
        let n = rng.random_range(30..=120);
        let d = rng.random_range(2..=5);
        let x = random_matrix(&mut rng, n, d);
        let task = if case % 2 == 0 { Task::Regression } else { Task::Classification };
        let targets = match task {
            Task::Regression => Targets::Real(x.rows().into_iter().map(|r| r[0] * r[1] + r.sum()).collect()),
            Task::Classification => {
                Targets::Labels(x.rows().into_iter().map(|r| usize::from(r[0] + r[1] > 0.0)).collect())
            }
        };
        let cfg = SpinexConfig {
            n_neighbors: rng.random_range(2..=8),
            weighting: if case % 3 == 0 { Weighting::Reciprocal } else { Weighting::Gaussian },
            exclude_method: if case % 4 < 2 { ExcludeMethod::Zero } else { ExcludeMethod::Mean },
            ..passthrough(task)
        };
        let m = SpinexModel::fit(&cfg, &Dataset::from_arrays(x, targets).unwrap()).unwrap();
        let q = random_matrix(&mut rng, 6, d);

        let contributions = explain::feature_contributions(&m, q.view()).unwrap();
        let interactions = explain::interaction_effects(&m, q.view()).unwrap();
        let importance = explain::global_feature_importance(&m, q.view()).unwrap();
        let combos = explain::combination_impact(&m, q.view(), d.min(3)).unwrap();

        let mut abs_sum = vec![0.0; d];
        let mut combo_oracle: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (i, row) in q.rows().into_iter().enumerate() {
            let row = row.to_vec();
            let class = match task {
                Task::Regression => None,
                Task::Classification => {
                    let p = m.predict_proba(Array2::from_shape_vec((1, d), row.clone()).unwrap().view()).unwrap();
                    Some((0..p.ncols()).fold(0, |b, c| if p[[0, c]] > p[[0, b]] { c } else { b }))
                }
            };
            let base = output(&m, &row, class);
            let drop = |fs: &[usize]| base - output(&m, &excluded(&m, &row, fs), class);
            let c: Vec<f64> = (0..d).map(|k| drop(&[k])).collect();
            for k in 0..d {
                note((contributions[i].values[k] - c[k]).abs());
                abs_sum[k] += c[k].abs();
                let im = &interactions[i];
                ensure(im.get(k, k) == 0.0, || format!("case {case}: nonzero diagonal at {k}"))?;
                for l in 0..d {
                    ensure(im.get(k, l) == im.get(l, k), || format!("case {case}: asymmetric at ({k},{l})"))?;
                    if k != l {
                        note((im.get(k, l) - (c[k] + c[l] - drop(&[k, l]))).abs());
                    }
                }
            }
            for e in &combos.entries {
                *combo_oracle.entry(e.features.clone()).or_default() += drop(&e.features) / q.nrows() as f64;
            }
        }
        for k in 0..d {
            note((importance[k] - abs_sum[k] / q.nrows() as f64).abs());
        }
        for e in &combos.entries {
            note((e.impact - combo_oracle[&e.features]).abs());
        }
    }
    ensure(worst <= EXPLAIN_TOL, || format!("max deviation {worst:e} over {checked} values"))?;
    let took = within_budget(start, EXPLAIN_BUDGET)?;
    Ok(format!("{checked} C_k / I_kl / I_F / F_k values; max |Δ| {worst:.1e}; {took:.2?}"))
}

/// Independent per-row formulas for every nonlinear family.
fn family_oracle(family: RegressionFamily, x: &[f64]) -> f64 {
    let sum_pow = |offset: i32| (1..x.len()).map(|j| x[j].powi(j as i32 + offset)).sum::<f64>();
    match family {
        RegressionFamily::Synthetic => x[0] + sum_pow(0),
        RegressionFamily::Cubic => x[0] + sum_pow(2),
        RegressionFamily::Exponential => x[0].exp() + sum_pow(0),
        RegressionFamily::Step => (if x[0] >= 0.5 { 1.0 } else { 0.0 }) + sum_pow(0),
        RegressionFamily::ComplexInteraction => x[0].powi(2) + x[1].sin() * (x[2].powi(2) + 1.0).ln(),
        RegressionFamily::Polynomial => x[0].powi(3) + x[1].powi(4) - x[2].powi(5),
        RegressionFamily::ExpLog => x[0].exp() * (1.0 + x[1]).ln(),
        RegressionFamily::SinExp => (std::f64::consts::PI * x[0]).sin() * x[1].exp(),
        RegressionFamily::Tan => x[0].tan() + sum_pow(0),
        RegressionFamily::Linear => unreachable!(),
    }
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, family) in RegressionFamily::ALL.into_iter().enumerate() {
        let spec = RegressionGenSpec { seed: 300 + i as u64, ..RegressionGenSpec::new(family, 400, 6) };
        let g = gen_regression(&spec).map_err(|e| format!("{family}: {e}"))?;
        let y = g.dataset.targets().as_real().unwrap();
        for (row, t) in g.dataset.features().rows().into_iter().zip(y) {
            let expected = match family {
                RegressionFamily::Linear => row.iter().zip(g.coefficients.as_ref().unwrap()).map(|(a, b)| a * b).sum(),
                f => family_oracle(f, row.as_slice().unwrap()),
            };
            worst = worst.max((expected - t).abs());
        }
    }
    ensure(worst < GENERATOR_TOL, || format!("max formula deviation {worst:e}"))?;

    for (name, spec) in regression_suite(42) {
        let d = gen_regression(&spec).map_err(|e| format!("{name}: {e}"))?.dataset;
        ensure((d.n_samples(), d.n_features()) == (spec.n_samples, spec.n_features), || {
            format!("{name}: wrong shape")
        })?;
    }
    for (name, spec) in classification_suite_a(42).into_iter().chain(classification_suite_b(42)) {
        let g = gen_classification(&spec).map_err(|e| format!("{name}: {e}"))?;
        let d = &g.dataset;
        ensure((d.n_samples(), d.n_features()) == (spec.n_samples, spec.n_features), || {
            format!("{name}: wrong shape")
        })?;
        let n1_expected = (spec.weights[1] * spec.n_samples as f64).round() as usize;
        ensure(spec.class_sizes() == [spec.n_samples - n1_expected, n1_expected], || format!("{name}: class sizes"))?;
        let n1 = d.targets().as_labels().unwrap().iter().filter(|&&l| l == 1).count();
        ensure(n1.abs_diff(n1_expected) <= g.perturbed_rows.len(), || {
            format!("{name}: {n1} positives, expected {n1_expected} ± {} flipped", g.perturbed_rows.len())
        })?;
    }
    let (_, first_b) = &classification_suite_b(42)[0];
    let labels = gen_classification(first_b).unwrap().dataset.targets().as_labels().unwrap().to_vec();
    let counts = (labels.iter().filter(|&&l| l == 0).count(), labels.iter().filter(|&&l| l == 1).count());
    ensure(counts == (45, 5), || format!("series B dataset 1 class counts {counts:?}, expected (45, 5)"))?;
    let took = within_budget(start, GENERATOR_BUDGET)?;
    Ok(format!("10 families max |Δ| {worst:.1e}; 18 + 18 shapes; series B #1 counts 45/5; {took:.2?}"))
}

fn pairwise_auc(labels: &[usize], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn criterion_4() -> Check {
    let a = [3.0, -1.0, 4.5, 2.0, 7.25];
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let r2_mean = evalrank::r2(&a, &[mean; 5]).unwrap();
    ensure(r2_mean.abs() <= METRIC_TOL, || format!("r2 against the mean is {r2_mean}"))?;
    ensure(evalrank::mae(&a, &a).unwrap() == 0.0, || "MAE of perfect predictions".into())?;
    let labels = [0, 1, 1, 0, 1];
    ensure(evalrank::accuracy(&labels, &labels).unwrap() == 1.0, || "accuracy of perfect predictions".into())?;
    let scores: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    ensure(evalrank::auc(&labels, &scores).unwrap() == 1.0, || "AUC of perfect scores".into())?;
    let uniform = Array2::from_elem((labels.len(), 2), 0.5);
    let ll = evalrank::logloss(&labels, uniform.view()).unwrap();
    ensure((ll - std::f64::consts::LN_2).abs() <= METRIC_TOL, || format!("uniform logloss {ll}"))?;
    let energy = evalrank::estimated_energy(1.0, 10.0, 0.0);
    ensure(energy == 10.0, || format!("estimated_energy(1.0, 10, 0) = {energy}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(4..=80);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse scores force ties
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..1.0f64) * 8.0).floor()).collect();
        worst = worst.max((evalrank::auc(&labels, &scores).unwrap() - pairwise_auc(&labels, &scores)).abs());
    }
    ensure(worst <= METRIC_TOL, || format!("AUC deviates from the pairwise oracle by {worst:e}"))?;
    Ok(format!("fixtures exact; ln2 logloss; energy 10.0 MB·s; 50 AUC fixtures max |Δ| {worst:.1e}"))
}

fn check_partition(folds: &[Fold], n: usize) -> Result<(), String> {
    let mut seen = vec![0usize; n];
    for f in folds {
        for &i in &f.test {
            seen[i] += 1;
        }
        ensure(f.train.len() + f.test.len() == n, || "train/test do not cover all rows".into())?;
        ensure(f.train.iter().all(|i| f.test.binary_search(i).is_err()), || "train and test overlap".into())?;
    }
    ensure(seen.iter().all(|&c| c == 1), || "test folds are not a partition".into())?;
    let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
    let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
    ensure(spread <= 1, || format!("fold sizes {sizes:?}"))
}

fn leak_sentinel() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let n = 60;
    let mut x = random_matrix(&mut rng, n, 4);
    for i in (0..n).step_by(7) {
        x[[i, i % 4]] = f64::NAN;
    }
    let y: Vec<f64> = x.rows().into_iter().map(|r| r.iter().filter(|v| v.is_finite()).sum()).collect();
    let data = Dataset::from_arrays(x, Targets::Real(y)).unwrap();
    let models = [
        ModelSpec::new("spinex", ModelKind::Spinex { config: serde_json::json!({}) }),
        ModelSpec::new(
            "selecting",
            ModelKind::Spinex { config: serde_json::json!({"auto_select_features": true, "n_features_to_select": 2}) },
        ),
        ModelSpec::new("knn", ModelKind::Knn { k: 3, metric: None }),
    ];
    let folds = kfold_split(n, 5, 9).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for fold in &folds {
        let (mut xs, ys, names) = data.clone().into_parts();
        let mut ys = ys.as_real().unwrap().to_vec();
        for &i in &fold.test {
            ys[i] = 1e6 + i as f64;
            xs.row_mut(i).fill(-1e3);
        }
        let poisoned = Dataset::new(xs, Targets::Real(ys), names).unwrap();
        for spec in &models {
            let clean = spec.fit(&prepare_fold(&data, fold).unwrap().0).map_err(|e| e.to_string())?;
            let dirty = spec.fit(&prepare_fold(&poisoned, fold).unwrap().0).map_err(|e| e.to_string())?;
            ensure(clean == dirty, || format!("{} changed after mutating test rows", spec.name))?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for config in 0..30u64 {
        let n = rng.random_range(20..=400);
        let folds = kfold_split(n, 5, config).map_err(|e| e.to_string())?;
        ensure(folds.len() == 5, || "expected five folds".into())?;
        check_partition(&folds, n).map_err(|e| format!("kfold n={n}: {e}"))?;
        ensure(folds == kfold_split(n, 5, config).unwrap(), || "kfold not deterministic".into())?;

        let positive_rate = rng.random_range(0.1..0.9);
        let labels: Vec<usize> = (0..n).map(|i| usize::from((i as f64) < positive_rate * n as f64)).collect();
        let s = stratified_kfold_split(&labels, 10, config).map_err(|e| e.to_string())?;
        check_partition(&s.folds, n).map_err(|e| format!("stratified n={n}: {e}"))?;
        ensure(s == stratified_kfold_split(&labels, 10, config).unwrap(), || "stratified not deterministic".into())?;
        for class in 0..2 {
            let share = labels.iter().filter(|&&l| l == class).count() as f64 / n as f64;
            for f in &s.folds {
                let count = f.test.iter().filter(|&&i| labels[i] == class).count() as f64;
                let expected = share * f.test.len() as f64;
                ensure((count - expected).abs() <= 1.0, || {
                    format!("n={n} class {class}: {count} in fold of {}, expected {expected:.2}", f.test.len())
                })?;
            }
        }
    }
    let sentinel = leak_sentinel()?;
    Ok(format!("30 configurations x (5-fold, stratified 10-fold); leak sentinel held for {sentinel} fold fits"))
}

fn record(model: &str, dataset: &str, mae: f64, r2: f64) -> MetricRecord {
    MetricRecord {
        model_name: model.into(),
        dataset_name: dataset.into(),
        mae: Some(mae),
        r2: Some(r2),
        ..Default::default()
    }
}

fn criterion_6() -> Check {
    let metrics = [(MetricKind::Mae, Direction::LowerBetter), (MetricKind::R2, Direction::HigherBetter)];
    let summary = |recs: &[MetricRecord]| -> Vec<(String, Vec<usize>, usize, usize)> {
        let t = evalrank::rank_models(recs, &metrics).unwrap();
        t.rows.iter().map(|r| (r.model.clone(), r.ranks.clone(), r.rank_sum, r.overall_rank)).collect()
    };
    let row = |m: &str, ranks: [usize; 2], sum, overall| (m.to_owned(), ranks.to_vec(), sum, overall);

    let dominance = summary(&[record("A", "d", 1.0, 0.9), record("B", "d", 2.0, 0.5)]);
    ensure(dominance == vec![row("A", [1, 1], 2, 1), row("B", [2, 2], 4, 2)], || format!("dominance: {dominance:?}"))?;

    let tie = summary(&[record("A", "d", 1.0, 0.9), record("B", "d", 1.0, 0.9), record("C", "d", 3.0, 0.1)]);
    ensure(tie == vec![row("A", [1, 1], 2, 1), row("B", [1, 1], 2, 1), row("C", [3, 3], 6, 3)], || {
        format!("tie: {tie:?}")
    })?;

    // averages: A mae 2.0 r2 0.6; B mae 1.5 r2 0.5; C mae 3.0 r2 0.8
    let mix = summary(&[
        record("A", "d1", 1.0, 0.8),
        record("A", "d2", 3.0, 0.4),
        record("B", "d1", 2.0, 0.7),
        record("B", "d2", 1.0, 0.3),
        record("C", "d1", 4.0, 0.9),
        record("C", "d2", 2.0, 0.7),
    ]);
    let expected = vec![row("A", [2, 2], 4, 1), row("B", [1, 3], 4, 1), row("C", [3, 1], 4, 1)];
    ensure(mix == expected, || format!("3-model mix: {mix:?}"))?;
    Ok("dominance, tie and 3-model/2-dataset fixtures reproduced exactly".into())
}

fn criterion_7() -> Check {
    let spec = ExperimentSpec {
        suite: "soft-check".into(),
        datasets: vec![DatasetSource::Generator {
            name: "complex_interaction".into(),
            generator: GenSpec::Regression(RegressionGenSpec {
                seed: 42,
                ..RegressionGenSpec::new(RegressionFamily::ComplexInteraction, 500, 7)
            }),
        }],
        models: vec![
            ModelSpec::new("SPINEX", ModelKind::Spinex { config: serde_json::json!({}) }),
            ModelSpec::new("KNeighbors", ModelKind::Knn { k: 5, metric: None }),
        ],
        cv: CvSpec::Kfold(5),
        seed: 42,
        explain: false,
        output_dir: None,
    };
    let report = run_experiment(&spec).map_err(|e| e.to_string())?;
    let spinex = &report.cell("SPINEX", "complex_interaction").unwrap().aggregate;
    let knn = &report.cell("KNeighbors", "complex_interaction").unwrap().aggregate;
    let (r2, mae, knn_mae) = (spinex.r2.unwrap(), spinex.mae.unwrap(), knn.mae.unwrap());
    let detail =
        format!("R² {r2:.4} (floor {SOFT_R2_FLOOR}); MAE {mae:.4} vs kNN {knn_mae:.4} (ratio {:.3})", mae / knn_mae);
    ensure(r2 >= SOFT_R2_FLOOR && mae <= SOFT_MAE_RATIO * knn_mae, || detail.clone())?;
    Ok(detail)
}

fn bench_hash(out: &std::path::Path) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_spinex"))
        .args(["bench", "--suite", "synthetic-regression", "--seed", "42", "--formats", "json", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(output.status.success(), || {
        format!("exit {:?}: {}", output.status.code(), String::from_utf8_lossy(&output.stderr))
    })?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    let hash =
        stdout.lines().find_map(|l| l.strip_prefix("determinism_hash: ")).ok_or("no determinism_hash line")?.to_owned();
    Ok((hash, took))
}

fn criterion_8() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (h1, t1) = bench_hash(&dir.path().join("run1"))?;
    ensure(t1 < BENCH_BUDGET, || format!("first run took {t1:.1?}"))?;
    let (h2, t2) = bench_hash(&dir.path().join("run2"))?;
    ensure(t2 < BENCH_BUDGET, || format!("second run took {t2:.1?}"))?;
    ensure(h1 == h2, || format!("hashes differ: {h1} vs {h2}"))?;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run1/report.json")).unwrap()).unwrap();
    ensure(report["determinism_hash"] == h1.as_str(), || "report.json hash differs from stdout".into())?;
    Ok(format!("hash {}… identical; runs {t1:.1?} and {t2:.1?}", &h1[..16]))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("kNN equivalence", criterion_1),
        ("explanation oracles", criterion_2),
        ("generator fidelity", criterion_3),
        ("metric fixtures", criterion_4),
        ("CV protocol", criterion_5),
        ("ranking fixtures", criterion_6),
        ("soft performance check", criterion_7),
        ("end-to-end determinism and budget", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
