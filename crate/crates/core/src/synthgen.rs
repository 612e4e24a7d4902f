//! Seeded synthetic regression and binary classification generators.
//!
//! Nonlinear families draw features from `U[0, 1)`; the linear family and the
//! classification generator use standard normals. Identical specs produce
//! bit-identical datasets.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{write_csv, Dataset, Targets};
use crate::error::{Result, SpinexError};

/// Outlier rows receive extra noise with this multiple of the base noise std.
pub const OUTLIER_NOISE_FACTOR: f64 = 10.0;
/// Distance kept between `tan` inputs and its pole at π/2.
pub const TAN_POLE_MARGIN: f64 = 0.05;
/// Upper bound of the uniform draw for linear weights.
pub const LINEAR_WEIGHT_SCALE: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionFamily {
    Linear,
    Synthetic,
    Cubic,
    Exponential,
    Step,
    ComplexInteraction,
    Polynomial,
    ExpLog,
    SinExp,
    Tan,
}

impl RegressionFamily {
    pub const ALL: [RegressionFamily; 10] = [
        RegressionFamily::Linear,
        RegressionFamily::Synthetic,
        RegressionFamily::Cubic,
        RegressionFamily::Exponential,
        RegressionFamily::Step,
        RegressionFamily::ComplexInteraction,
        RegressionFamily::Polynomial,
        RegressionFamily::ExpLog,
        RegressionFamily::SinExp,
        RegressionFamily::Tan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegressionFamily::Linear => "linear",
            RegressionFamily::Synthetic => "synthetic",
            RegressionFamily::Cubic => "cubic",
            RegressionFamily::Exponential => "exponential",
            RegressionFamily::Step => "step",
            RegressionFamily::ComplexInteraction => "complex_interaction",
            RegressionFamily::Polynomial => "polynomial",
            RegressionFamily::ExpLog => "exp_log",
            RegressionFamily::SinExp => "sin_exp",
            RegressionFamily::Tan => "tan",
        }
    }

    /// Number of leading columns the family formula reads at minimum.
    pub fn min_features(self) -> usize {
        match self {
            RegressionFamily::ComplexInteraction | RegressionFamily::Polynomial => 3,
            RegressionFamily::ExpLog | RegressionFamily::SinExp => 2,
            _ => 1,
        }
    }

    /// Noise-free target for one feature row. Not defined for the linear family.
    pub fn target(self, x: &[f64]) -> f64 {
        let tail = |offset: i32| -> f64 { x.iter().enumerate().skip(1).map(|(j, v)| v.powi(j as i32 + offset)).sum() };
        match self {
            RegressionFamily::Linear => panic!("linear targets depend on generated weights"),
            RegressionFamily::Synthetic => x[0] + tail(0),
            RegressionFamily::Cubic => x[0] + tail(2),
            RegressionFamily::Exponential => x[0].exp() + tail(0),
            RegressionFamily::Step => unit_step(x[0] - 0.5) + tail(0),
            RegressionFamily::ComplexInteraction => x[0] * x[0] + x[1].sin() * (x[2] * x[2] + 1.0).ln(),
            RegressionFamily::Polynomial => x[0].powi(3) + x[1].powi(4) - x[2].powi(5),
            RegressionFamily::ExpLog => x[0].exp() * x[1].ln_1p(),
            RegressionFamily::SinExp => (PI * x[0]).sin() * x[1].exp(),
            RegressionFamily::Tan => x[0].tan() + tail(0),
        }
    }
}

/// Heaviside step closed at zero: `u(0) = 1`.
pub fn unit_step(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for RegressionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegressionFamily {
    type Err = SpinexError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let norm = norm.strip_prefix("generate_").unwrap_or(&norm);
        let norm = norm.strip_suffix("_data").unwrap_or(norm);
        match norm {
            "regression" => return Ok(RegressionFamily::Linear),
            "complex" => return Ok(RegressionFamily::ComplexInteraction),
            _ => {}
        }
        RegressionFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == norm)
            .ok_or_else(|| SpinexError::InvalidSpec(format!("unknown family '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionGenSpec {
    pub family: RegressionFamily,
    pub n_samples: usize,
    pub n_features: usize,
    /// Linear family only; defaults to every feature.
    pub n_informative: Option<usize>,
    pub noise: f64,
    pub n_outliers: usize,
    pub bias: f64,
    /// Linear family only: permute rows and columns.
    pub shuffle: bool,
    /// Linear family only: draw `X` with a low-rank singular profile.
    pub effective_rank: Option<usize>,
    pub tail_strength: f64,
    pub seed: u64,
}

impl Default for RegressionGenSpec {
    fn default() -> Self {
        RegressionGenSpec {
            family: RegressionFamily::Linear,
            n_samples: 100,
            n_features: 5,
            n_informative: None,
            noise: 0.0,
            n_outliers: 0,
            bias: 0.0,
            shuffle: true,
            effective_rank: None,
            tail_strength: 0.5,
            seed: 0,
        }
    }
}

impl RegressionGenSpec {
    pub fn new(family: RegressionFamily, n_samples: usize, n_features: usize) -> Self {
        RegressionGenSpec { family, n_samples, n_features, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SpinexError::InvalidSpec(m));
        if self.n_samples == 0 || self.n_features == 0 {
            return bad("n_samples and n_features must be positive".into());
        }
        if self.n_informative.is_some_and(|k| k > self.n_features) {
            return bad(format!("n_informative exceeds n_features ({})", self.n_features));
        }
        if self.n_outliers > self.n_samples {
            return bad(format!("n_outliers {} exceeds n_samples {}", self.n_outliers, self.n_samples));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        if !self.bias.is_finite() {
            return bad("bias must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.tail_strength) {
            return bad(format!("tail_strength must lie in [0, 1], got {}", self.tail_strength));
        }
        if self.effective_rank == Some(0) {
            return bad("effective_rank must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassificationGenSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    /// Class proportions for labels 0 and 1.
    pub weights: [f64; 2],
    pub flip_y: f64,
    pub class_sep: f64,
    pub seed: u64,
}

impl Default for ClassificationGenSpec {
    fn default() -> Self {
        ClassificationGenSpec {
            n_samples: 100,
            n_features: 20,
            n_informative: 2,
            n_redundant: 2,
            weights: [0.5, 0.5],
            flip_y: 0.01,
            class_sep: 1.0,
            seed: 0,
        }
    }
}

impl ClassificationGenSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SpinexError::InvalidSpec(m));
        if self.n_samples == 0 || self.n_informative == 0 {
            return bad("n_samples and n_informative must be positive".into());
        }
        if self.n_informative + self.n_redundant > self.n_features {
            return bad(format!(
                "n_informative + n_redundant = {} exceeds n_features {}",
                self.n_informative + self.n_redundant,
                self.n_features
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (self.weights[0] + self.weights[1] - 1.0).abs() > 1e-9 {
            return bad(format!("weights must be non-negative and sum to 1, got {:?}", self.weights));
        }
        if !(0.0..=1.0).contains(&self.flip_y) {
            return bad(format!("flip_y must lie in [0, 1], got {}", self.flip_y));
        }
        if !(self.class_sep > 0.0 && self.class_sep.is_finite()) {
            return bad(format!("class_sep must be positive, got {}", self.class_sep));
        }
        Ok(())
    }

    /// Rows assigned to each class before label flipping: class 1 gets
    /// `round(w1 · n)`, class 0 the remainder.
    pub fn class_sizes(&self) -> [usize; 2] {
        let n1 = ((self.weights[1] * self.n_samples as f64).round() as usize).min(self.n_samples);
        [self.n_samples - n1, n1]
    }

    /// Number of rows whose label is redrawn.
    pub fn n_flipped(&self) -> usize {
        (self.flip_y * self.n_samples as f64).floor() as usize
    }
}

/// A generated dataset plus the ground truth used to build it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDataset {
    pub dataset: Dataset,
    /// Linear family: weight per (emitted) column.
    pub coefficients: Option<Vec<f64>>,
    /// Rows that received outlier noise (regression) or a redrawn label (classification), ascending.
    pub perturbed_rows: Vec<usize>,
}

pub fn gen_regression(spec: &RegressionGenSpec) -> Result<GeneratedDataset> {
    match spec.family {
        RegressionFamily::Linear => gen_regression_linear(spec),
        _ => gen_regression_family(spec),
    }
}

pub fn gen_regression_linear(spec: &RegressionGenSpec) -> Result<GeneratedDataset> {
    if spec.family != RegressionFamily::Linear {
        return Err(SpinexError::InvalidSpec(format!("expected the linear family, got {}", spec.family)));
    }
    spec.validate()?;
    let (n, d) = (spec.n_samples, spec.n_features);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = match spec.effective_rank {
        None => Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal)),
        Some(rank) => low_rank_matrix(n, d, rank, spec.tail_strength, &mut rng),
    };
    let n_informative = spec.n_informative.unwrap_or(d);
    let mut w = vec![0.0; d];
    for wj in w.iter_mut().take(n_informative) {
        *wj = LINEAR_WEIGHT_SCALE * rng.random::<f64>();
    }
    let mut y: Vec<f64> =
        x.rows().into_iter().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + spec.bias).collect();
    let mut perturbed = add_noise(&mut y, spec.noise, spec.n_outliers, &mut rng);
    if spec.shuffle {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let mut cols: Vec<usize> = (0..d).collect();
        cols.shuffle(&mut rng);
        x = x.select(Axis(0), &rows).select(Axis(1), &cols);
        w = cols.iter().map(|&c| w[c]).collect();
        y = rows.iter().map(|&r| y[r]).collect();
        let mut new_pos = vec![0; n];
        for (i, &r) in rows.iter().enumerate() {
            new_pos[r] = i;
        }
        perturbed = perturbed.iter().map(|&r| new_pos[r]).collect();
        perturbed.sort_unstable();
    }
    Ok(GeneratedDataset {
        dataset: Dataset::from_arrays(x, Targets::Real(y))?,
        coefficients: Some(w),
        perturbed_rows: perturbed,
    })
}

/// Singular value `i` of the bell-plus-tail profile.
pub fn low_rank_singular_value(i: usize, effective_rank: usize, tail_strength: f64) -> f64 {
    let t = i as f64 / effective_rank as f64;
    (1.0 - tail_strength) * (-t * t).exp() + tail_strength * (-t).exp()
}

/// `U · diag(s) · Vᵀ` with random orthonormal `U`, `V` and the profile above.
fn low_rank_matrix(n: usize, d: usize, rank: usize, tail: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let k = n.min(d);
    let mut gaussian = |rows: usize| DMatrix::from_fn(rows, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = gaussian(n).qr().q();
    let v = gaussian(d).qr().q();
    let s = DMatrix::from_fn(k, k, |i, j| if i == j { low_rank_singular_value(i, rank, tail) } else { 0.0 });
    let m = u * s * v.transpose();
    Array2::from_shape_fn((n, d), |(i, j)| m[(i, j)])
}

/// Adds `N(0, noise)` to every target and `N(0, 10·noise)` to `n_outliers`
/// distinct rows. Returns the outlier rows in ascending order.
fn add_noise(y: &mut [f64], noise: f64, n_outliers: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let base = Normal::new(0.0, noise).expect("noise validated");
    for v in y.iter_mut() {
        *v += base.sample(rng);
    }
    let extra = Normal::new(0.0, OUTLIER_NOISE_FACTOR * noise).expect("noise validated");
    let mut rows = index::sample(rng, y.len(), n_outliers).into_vec();
    rows.sort_unstable();
    for &r in &rows {
        y[r] += extra.sample(rng);
    }
    rows
}

pub fn gen_regression_family(spec: &RegressionGenSpec) -> Result<GeneratedDataset> {
    if spec.family == RegressionFamily::Linear {
        return Err(SpinexError::InvalidSpec("use gen_regression_linear for the linear family".into()));
    }
    spec.validate()?;
    let needed = spec.family.min_features();
    if spec.n_features < needed {
        return Err(SpinexError::FamilyNeedsMoreFeatures {
            family: spec.family.as_str(),
            needed,
            got: spec.n_features,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = Array2::from_shape_simple_fn((spec.n_samples, spec.n_features), || rng.random::<f64>());
    if spec.family == RegressionFamily::Tan {
        for v in x.column_mut(0) {
            *v = clamp_from_pole(*v);
        }
    }
    let mut y: Vec<f64> = x.rows().into_iter().map(|r| spec.family.target(r.as_slice().expect("row"))).collect();
    let perturbed = add_noise(&mut y, spec.noise, spec.n_outliers, &mut rng);
    Ok(GeneratedDataset {
        dataset: Dataset::from_arrays(x, Targets::Real(y))?,
        coefficients: None,
        perturbed_rows: perturbed,
    })
}

/// Pushes `v` out of the open band `(π/2 − margin, π/2 + margin)`.
fn clamp_from_pole(v: f64) -> f64 {
    let offset = v - FRAC_PI_2;
    if offset.abs() >= TAN_POLE_MARGIN {
        v
    } else if offset < 0.0 {
        FRAC_PI_2 - TAN_POLE_MARGIN
    } else {
        FRAC_PI_2 + TAN_POLE_MARGIN
    }
}

/// Binary Gaussian clusters at antipodal hypercube vertices `±class_sep`.
///
/// Column layout before the row shuffle: informative block, redundant
/// block (linear combinations of the informative block), then pure noise.
pub fn gen_classification(spec: &ClassificationGenSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    let (n, d, k) = (spec.n_samples, spec.n_features, spec.n_informative);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vertex: Vec<f64> = (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let [n0, _] = spec.class_sizes();
    let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n0)).collect();

    let mut x = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        let sign = if labels[i] == 0 { 1.0 } else { -1.0 };
        for j in 0..k {
            x[[i, j]] = sign * spec.class_sep * vertex[j] + rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mixing = Array2::from_shape_simple_fn((k, spec.n_redundant), || rng.random_range(-1.0..1.0));
    let redundant = x.slice(ndarray::s![.., ..k]).dot(&mixing);
    x.slice_mut(ndarray::s![.., k..k + spec.n_redundant]).assign(&redundant);
    for v in x.slice_mut(ndarray::s![.., k + spec.n_redundant..]) {
        *v = rng.sample(StandardNormal);
    }

    let mut flipped = index::sample(&mut rng, n, spec.n_flipped()).into_vec();
    flipped.sort_unstable();
    for &r in &flipped {
        labels[r] = rng.random_range(0..2);
    }

    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let x = x.select(Axis(0), &rows);
    let labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
    let mut new_pos = vec![0; n];
    for (i, &r) in rows.iter().enumerate() {
        new_pos[r] = i;
    }
    let mut perturbed: Vec<usize> = flipped.iter().map(|&r| new_pos[r]).collect();
    perturbed.sort_unstable();
    Ok(GeneratedDataset {
        dataset: Dataset::from_arrays(x, Targets::Labels(labels))?,
        coefficients: None,
        perturbed_rows: perturbed,
    })
}

/// A named generator recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Regression(RegressionGenSpec),
    Classification(ClassificationGenSpec),
}

impl GenSpec {
    pub fn generate(&self) -> Result<GeneratedDataset> {
        match self {
            GenSpec::Regression(s) => gen_regression(s),
            GenSpec::Classification(s) => gen_classification(s),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GenSpec::Regression(s) => s.seed,
            GenSpec::Classification(s) => s.seed,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            GenSpec::Regression(s) => s.family.as_str(),
            GenSpec::Classification(_) => "classification",
        }
    }
}

/// Writes a generated dataset as CSV with a `# spinex-gen family=… seed=…` line.
pub fn write_generated_csv(spec: &GenSpec, g: &GeneratedDataset, path: impl AsRef<Path>) -> Result<()> {
    let comment = format!("spinex-gen family={} seed={}", spec.family_name(), spec.seed());
    write_csv(&g.dataset, path, Some(&comment))
}

fn dataset_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// The eighteen-dataset regression benchmark grid.
pub fn regression_suite(seed: u64) -> Vec<(String, RegressionGenSpec)> {
    use RegressionFamily as F;
    let linear = |n, d, inf| RegressionGenSpec { n_informative: Some(inf), ..RegressionGenSpec::new(F::Linear, n, d) };
    let family = |f, n, d, noise| RegressionGenSpec { noise, ..RegressionGenSpec::new(f, n, d) };
    let rows = vec![
        linear(50, 5, 5),
        RegressionGenSpec { noise: 0.1, ..linear(5000, 4, 4) },
        RegressionGenSpec { bias: 10.0, ..linear(1000, 6, 5) },
        RegressionGenSpec { shuffle: false, ..linear(7000, 2, 2) },
        RegressionGenSpec { effective_rank: Some(5), ..linear(750, 8, 6) },
        RegressionGenSpec { tail_strength: 0.1, ..linear(800, 4, 4) },
        RegressionGenSpec { bias: 10.0, ..linear(1000, 5, 3) },
        RegressionGenSpec { shuffle: false, ..linear(2500, 3, 2) },
        RegressionGenSpec { noise: 0.9, effective_rank: Some(10), ..linear(1000, 4, 4) },
        family(F::Step, 2000, 7, 0.0),
        RegressionGenSpec { n_outliers: 20, ..family(F::Cubic, 1000, 10, 0.5) },
        RegressionGenSpec { n_outliers: 200, ..family(F::Synthetic, 2000, 6, 0.8) },
        RegressionGenSpec { n_outliers: 40, ..family(F::Exponential, 2000, 5, 0.8) },
        family(F::Tan, 750, 8, 0.1),
        family(F::ComplexInteraction, 500, 7, 0.0),
        family(F::Polynomial, 2000, 5, 0.1),
        family(F::ExpLog, 1000, 10, 0.5),
        family(F::SinExp, 3000, 5, 0.0),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, s)| {
            (format!("dataset_{:02}_{}", i + 1, s.family), RegressionGenSpec { seed: dataset_seed(seed, i), ..s })
        })
        .collect()
}

/// Classification grid, series A: fixed flip rate, separation and balanced classes.
pub fn classification_suite_a(seed: u64) -> Vec<(String, ClassificationGenSpec)> {
    let rows = [
        (50, 3, 2, 0),
        (100, 10, 6, 2),
        (1000, 80, 20, 40),
        (500, 20, 20, 0),
        (5000, 40, 15, 10),
        (10000, 10, 5, 5),
        (500, 20, 20, 0),
        (3000, 55, 20, 20),
        (50000, 5, 3, 0),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (n, d, inf, red))| {
            let spec = ClassificationGenSpec {
                n_samples: n,
                n_features: d,
                n_informative: inf,
                n_redundant: red,
                seed: dataset_seed(seed, i),
                ..Default::default()
            };
            (format!("dataset_a{}", i + 1), spec)
        })
        .collect()
}

/// Classification grid, series B: varying flip rate, separation and imbalance.
pub fn classification_suite_b(seed: u64) -> Vec<(String, ClassificationGenSpec)> {
    let rows = [
        (50, 3, 2, 0, 0.01, 1.0, 0.9),
        (100, 10, 6, 2, 0.02, 0.5, 0.8),
        (1000, 80, 20, 40, 0.03, 0.8, 0.7),
        (500, 20, 20, 0, 0.04, 0.2, 0.6),
        (5000, 40, 15, 10, 0.05, 0.3, 0.5),
        (10000, 10, 5, 5, 0.06, 0.4, 0.6),
        (1500, 100, 40, 0, 0.07, 0.5, 0.7),
        (3000, 55, 20, 20, 0.08, 0.6, 0.8),
        (50000, 5, 3, 0, 0.09, 0.7, 0.6),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (n, d, inf, red, flip_y, class_sep, w0))| {
            let spec = ClassificationGenSpec {
                n_samples: n,
                n_features: d,
                n_informative: inf,
                n_redundant: red,
                weights: [w0, 1.0 - w0],
                flip_y,
                class_sep,
                seed: dataset_seed(seed, i),
            };
            (format!("dataset_b{}", i + 1), spec)
        })
        .collect()
}
