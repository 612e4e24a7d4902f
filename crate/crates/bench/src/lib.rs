//! Fixtures for the criterion benchmarks.

use ndarray::Array2;
use spinex_core::synthgen::{gen_regression, RegressionFamily, RegressionGenSpec};
use spinex_core::{Dataset, PreprocessConfig, SpinexConfig, SpinexModel, Task};

/// Seeded `complex_interaction` data with `n` rows and `d` features.
pub fn regression_data(n: usize, d: usize, seed: u64) -> Dataset {
    let spec = RegressionGenSpec { seed, ..RegressionGenSpec::new(RegressionFamily::ComplexInteraction, n, d) };
    gen_regression(&spec).expect("valid fixture spec").dataset
}

/// The first `rows` rows of a fresh dataset drawn with a different seed.
pub fn queries(rows: usize, d: usize, seed: u64) -> Array2<f64> {
    regression_data(rows, d, seed.wrapping_add(1)).features().to_owned()
}

/// A default regressor fitted without outlier filtering, so row counts stay fixed.
pub fn fitted_model(n: usize, d: usize) -> SpinexModel {
    let cfg =
        SpinexConfig { preprocess: PreprocessConfig::passthrough(), ..SpinexConfig::default_for(Task::Regression) };
    SpinexModel::fit(&cfg, &regression_data(n, d, 7)).expect("fixture fits")
}
