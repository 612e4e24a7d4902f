use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spinex_core::data::{check_health, column_means, fill_missing, impute_missing, outlier_rows};
use spinex_core::{Dataset, MissingDataMethod, OutlierMethod, Targets};

fn with_holes() -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(prop::option::weighted(0.8, -10.0..10.0f64), 4 * 12).prop_filter_map(
        "every column needs an observed value",
        |cells| {
            let x =
                Array2::from_shape_vec((12, 4), cells.into_iter().map(|c| c.unwrap_or(f64::NAN)).collect()).unwrap();
            x.columns().into_iter().all(|c| c.iter().any(|v| v.is_finite())).then_some(x)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_imputation_is_idempotent(x in with_holes()) {
        let d = Dataset::from_arrays(x.clone(), Targets::Real(vec![0.0; 12])).unwrap();
        let once = impute_missing(&d, MissingDataMethod::MeanImputation).unwrap();
        let twice = impute_missing(&once, MissingDataMethod::MeanImputation).unwrap();
        prop_assert!(!once.has_missing());
        prop_assert_eq!(&once, &twice);
        // observed cells untouched, holes take the observed column mean
        let means = column_means(x.view()).unwrap();
        for ((i, j), v) in x.indexed_iter() {
            let expected = if v.is_nan() { means[j] } else { *v };
            prop_assert_eq!(once.features()[[i, j]], expected);
        }
        let mut filled = x.clone();
        fill_missing(&mut filled, &means);
        prop_assert_eq!(filled.view(), once.features());
    }

    #[test]
    fn health_rules_are_monotone_in_rows(d in 1usize..20, n in 1usize..400, extra in 0usize..200) {
        let small = check_health(&Dataset::from_arrays(Array2::zeros((n, d)), Targets::Real(vec![0.0; n])).unwrap());
        let m = n + extra;
        let large = check_health(&Dataset::from_arrays(Array2::zeros((m, d)), Targets::Real(vec![0.0; m])).unwrap());
        prop_assert!(large.obs_per_feature >= small.obs_per_feature);
        prop_assert!(!small.rule_10_pass || large.rule_10_pass);
        prop_assert!(!small.rule_23_pass || large.rule_23_pass);
        prop_assert!(!small.rule_ratio_pass || large.rule_ratio_pass);
        prop_assert!(!small.rule_23_pass || small.rule_10_pass);
        prop_assert!(!small.rule_10_pass || small.rule_ratio_pass);
    }
}

#[test]
fn z_score_flags_few_standard_normal_rows() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_simple_fn((1000, 1), || StandardNormal.sample(&mut rng));
        let flagged = outlier_rows(x.view(), OutlierMethod::ZScoreOutlierHandling).iter().filter(|f| **f).count();
        assert!(flagged < 20, "seed {seed}: {flagged} of 1000 rows flagged");
    }
}

#[test]
fn health_thresholds_at_boundaries() {
    let report =
        |n: usize| check_health(&Dataset::from_arrays(Array2::zeros((n, 2)), Targets::Real(vec![0.0; n])).unwrap());
    assert!(!report(9).rule_ratio_pass && report(10).rule_ratio_pass);
    assert!(!report(19).rule_10_pass && report(20).rule_10_pass);
    assert!(!report(45).rule_23_pass && report(46).rule_23_pass);
}
