mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use common::*;
use fusekit::data::DataTable;
use fusekit::recode::{
    activity_status_rule, apply_rule, interval_bin, main_income_source_rule, map_groups,
    max_of_columns, population_density_rule, quantile_bin, random_category, MaxGroup, RecodeRule,
};

#[test]
fn quintiles_of_distinct_values() {
    assert_eq!(
        quantile_bin(&[10.0, 20.0, 30.0, 40.0, 50.0], 5).unwrap(),
        vec![1, 2, 3, 4, 5]
    );
}

#[test]
fn tied_values_share_a_bin() {
    // Rank-based oracle: bin(x) = floor(k * #{values < x} / n) + 1.
    let values = [1.0, 1.0, 1.0, 2.0, 3.0];
    let bins = quantile_bin(&values, 2).unwrap();
    let oracle: Vec<u32> = values
        .iter()
        .map(|&x| {
            let below = values.iter().filter(|&&v| v < x).count();
            ((2 * below / values.len()) as u32 + 1).min(2)
        })
        .collect();
    assert_eq!(bins, oracle);
    assert_eq!(bins[0], bins[1]);
    assert_eq!(bins[1], bins[2]);
    assert_eq!(bins, vec![1, 1, 1, 2, 2]);
}

#[test]
fn constant_vector_errors() {
    let err = quantile_bin(&[7.0; 5], 5).unwrap_err();
    assert!(err.to_string().contains("categorical"), "{err}");
}

#[test]
fn quantile_bin_is_monotone() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    use rand::Rng;
    let values: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 100.0).collect();
    for k in [2, 5, 8] {
        let bins = quantile_bin(&values, k).unwrap();
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        for w in idx.windows(2) {
            assert!(bins[w[0]] <= bins[w[1]]);
        }
        assert!(bins.iter().all(|&b| (1..=k as u32).contains(&b)));
    }
}

#[test]
fn quantile_bins_are_balanced_up_to_ties() {
    let values: Vec<f64> = (0..1000).map(|i| i as f64).collect();
    let bins = quantile_bin(&values, 5).unwrap();
    for code in 1..=5u32 {
        assert_eq!(bins.iter().filter(|&&b| b == code).count(), 200);
    }
}

#[test]
fn interval_bin_left_closed() {
    assert_eq!(
        interval_bin(&[5.0, 10.0, 25.0], &[10.0, 20.0]).unwrap(),
        vec![1, 2, 3]
    );
    assert!(interval_bin(&[1.0], &[5.0, 5.0]).is_err());
}

#[test]
fn activity_status_examples() {
    let rule = activity_status_rule();
    let (map, na, default) = match &rule {
        RecodeRule::MapGroups {
            map,
            na_level,
            default_level,
        } => (map.clone(), *na_level, *default_level),
        _ => panic!("wrong rule kind"),
    };
    let input: Vec<Option<u32>> = vec![Some(1), Some(4), Some(5), Some(7)];
    assert_eq!(
        map_groups(&input, &map, na, default).unwrap(),
        vec![Some(1), Some(1), Some(2), Some(3)]
    );
    let input: Vec<Option<u32>> = vec![Some(6), Some(9), Some(11)];
    assert_eq!(
        map_groups(&input, &map, na, default).unwrap(),
        vec![Some(9), Some(9), Some(9)]
    );
    // Missing source values fall into the NA category 9.
    assert_eq!(map_groups(&[None], &map, na, default).unwrap(), vec![Some(9)]);
    // Empty input stays empty.
    assert_eq!(map_groups(&[], &map, na, default).unwrap(), vec![]);
    // Remaining direct codes.
    assert_eq!(
        map_groups(&[Some(10), Some(8)], &map, na, default).unwrap(),
        vec![Some(4), Some(5)]
    );
    let mut levels = rule.output_levels().unwrap();
    levels.sort_unstable();
    assert_eq!(levels, vec![1, 2, 3, 4, 5, 9]);
}

#[test]
fn uncovered_code_without_default_errors() {
    let map: BTreeMap<u32, u32> = [(1, 1)].into_iter().collect();
    assert!(map_groups(&[Some(2)], &map, None, None).is_err());
    assert_eq!(
        map_groups(&[Some(2)], &map, None, Some(7)).unwrap(),
        vec![Some(7)]
    );
}

#[test]
fn map_groups_idempotent_on_identity_rule() {
    let map: BTreeMap<u32, u32> = [(1, 1), (2, 2), (9, 9)].into_iter().collect();
    let input: Vec<Option<u32>> = vec![Some(1), Some(2), Some(9)];
    let once = map_groups(&input, &map, None, None).unwrap();
    let twice = map_groups(&once, &map, None, None).unwrap();
    assert_eq!(once, twice);
}

#[test]
fn density_shares_converge() {
    let rule = population_density_rule();
    let (levels, probs) = match &rule {
        RecodeRule::RandomCategory {
            levels,
            probabilities,
        } => (levels.clone(), probabilities.clone()),
        _ => panic!("wrong rule kind"),
    };
    let n = 100_000;
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let draws = random_category(n, &levels, &probs, &mut rng).unwrap();
    let mut chi2 = 0.0;
    for (level, p) in levels.iter().zip(&probs) {
        let count = draws.iter().filter(|&&d| d == *level).count();
        let share = count as f64 / n as f64;
        assert!(
            (share - p).abs() < 0.01,
            "level {level}: share {share:.4} vs target {p}"
        );
        let expected = p * n as f64;
        chi2 += (count as f64 - expected).powi(2) / expected;
    }
    // Chi-square goodness of fit, df = 2, critical value at alpha=0.001.
    assert!(chi2 < 13.8155, "chi2 = {chi2:.3}");
}

#[test]
fn random_category_edge_cases() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    assert_eq!(
        random_category(0, &[1, 2], &[0.5, 0.5], &mut rng).unwrap(),
        Vec::<u32>::new()
    );
    let all_one = random_category(200, &[1, 2, 3], &[1.0, 0.0, 0.0], &mut rng).unwrap();
    assert!(all_one.iter().all(|&c| c == 1));
    assert!(random_category(5, &[1, 2], &[0.7, 0.7], &mut rng).is_err());
}

fn income_table(rows: Vec<Vec<f64>>) -> DataTable {
    let names = [
        "PY010G", "PY020G", "PY050G", "PY080G", "PY100G", "PY090G", "PY110G", "PY120G", "PY130G",
        "PY140G",
    ];
    let columns = (0..names.len())
        .map(|j| metric(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    DataTable::new(names.iter().map(|s| s.to_string()).collect(), columns).unwrap()
}

#[test]
fn main_income_source_examples() {
    let rule = main_income_source_rule();
    let (groups, all_zero) = match &rule {
        RecodeRule::MaxOfColumns {
            groups,
            all_zero_level,
        } => (groups.clone(), *all_zero_level),
        _ => panic!("wrong rule kind"),
    };
    let table = income_table(vec![
        // Wages dominant.
        vec![30_000.0, 0.0, 1_000.0, 0.0, 5_000.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        // Pension dominant.
        vec![0.0, 0.0, 0.0, 0.0, 18_000.0, 200.0, 0.0, 0.0, 0.0, 0.0],
        // All zero.
        vec![0.0; 10],
    ]);
    assert_eq!(max_of_columns(&table, &groups, all_zero).unwrap(), vec![1, 2, 9]);
}

#[test]
fn max_of_columns_tie_goes_to_first_group() {
    let groups = vec![
        MaxGroup {
            columns: vec!["a".into()],
            level: 1,
        },
        MaxGroup {
            columns: vec!["b".into()],
            level: 2,
        },
    ];
    let table = DataTable::new(
        vec!["a".into(), "b".into()],
        vec![metric(&[5.0]), metric(&[5.0])],
    )
    .unwrap();
    assert_eq!(max_of_columns(&table, &groups, 9).unwrap(), vec![1]);
    let neg = DataTable::new(
        vec!["a".into(), "b".into()],
        vec![metric(&[-1.0]), metric(&[2.0])],
    )
    .unwrap();
    assert!(max_of_columns(&neg, &groups, 9).is_err());
}

#[test]
fn apply_rule_respects_declared_levels() {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let table = DataTable::new(
        vec!["v".into()],
        vec![metric(&[3.0, 1.0, 4.0, 1.5, 9.0, 2.6])],
    )
    .unwrap();
    let rule = RecodeRule::QuantileBin { k: 3 };
    let out = apply_rule(&table, "v", &rule, &mut rng).unwrap();
    let levels = rule.output_levels().unwrap();
    assert!(out.iter().all(|c| levels.contains(&c.unwrap())));
}

#[test]
fn rule_validation_rejects_bad_rules() {
    assert!(RecodeRule::QuantileBin { k: 1 }.validate().is_err());
    assert!(RecodeRule::IntervalBin {
        breakpoints: vec![]
    }
    .validate()
    .is_err());
    assert!(RecodeRule::RandomCategory {
        levels: vec![1],
        probabilities: vec![0.9]
    }
    .validate()
    .is_err());
}
