//! Variable preparation: quantile binning, interval binning, category
//! regrouping, probabilistic category generation, and maximum-source
//! derivation.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::{Error, Result};

/// One group of source columns mapping to an output level for
/// [`max_of_columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxGroup {
    pub columns: Vec<String>,
    pub level: u32,
}

/// Declarative recode rule attached to a schema variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecodeRule {
    /// Codes 1..k by empirical quantile membership; ties never split.
    QuantileBin { k: usize },
    /// Codes 1..b+1 by left-closed intervals over strictly increasing
    /// breakpoints: code i covers [bp[i-2], bp[i-1]).
    IntervalBin { breakpoints: Vec<f64> },
    /// Element-wise regrouping of category codes.
    MapGroups {
        map: BTreeMap<u32, u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        na_level: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default_level: Option<u32>,
    },
    /// I.i.d. category draws from a declared distribution.
    RandomCategory {
        levels: Vec<u32>,
        probabilities: Vec<f64>,
    },
    /// Per row, the column group holding the row maximum determines the
    /// output level; all-zero rows get `all_zero_level`.
    MaxOfColumns {
        groups: Vec<MaxGroup>,
        all_zero_level: u32,
    },
}

impl RecodeRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            RecodeRule::QuantileBin { k } => {
                if *k < 2 {
                    return Err(Error::Config("quantile_bin requires k >= 2".into()));
                }
            }
            RecodeRule::IntervalBin { breakpoints } => {
                if breakpoints.is_empty() {
                    return Err(Error::Config("interval_bin requires breakpoints".into()));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config(
                        "interval_bin breakpoints must be strictly increasing".into(),
                    ));
                }
            }
            RecodeRule::RandomCategory {
                levels,
                probabilities,
            } => {
                if levels.len() != probabilities.len() || levels.is_empty() {
                    return Err(Error::Config(
                        "random_category needs matching levels/probabilities".into(),
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-9 || probabilities.iter().any(|&p| p < 0.0) {
                    return Err(Error::Config(
                        "random_category probabilities must be nonnegative and sum to 1".into(),
                    ));
                }
            }
            RecodeRule::MapGroups { .. } | RecodeRule::MaxOfColumns { .. } => {}
        }
        Ok(())
    }

    /// Output level set of this rule, for building the categorised
    /// variable's scale declaration.
    pub fn output_levels(&self) -> Option<Vec<u32>> {
        match self {
            RecodeRule::QuantileBin { k } => Some((1..=*k as u32).collect()),
            RecodeRule::IntervalBin { breakpoints } => {
                Some((1..=breakpoints.len() as u32 + 1).collect())
            }
            RecodeRule::MapGroups {
                map,
                na_level,
                default_level,
            } => {
                let mut levels: Vec<u32> = map.values().copied().collect();
                levels.extend(na_level.iter().copied());
                levels.extend(default_level.iter().copied());
                levels.sort_unstable();
                levels.dedup();
                Some(levels)
            }
            RecodeRule::RandomCategory { levels, .. } => Some(levels.clone()),
            RecodeRule::MaxOfColumns {
                groups,
                all_zero_level,
            } => {
                let mut levels: Vec<u32> = groups.iter().map(|g| g.level).collect();
                levels.push(*all_zero_level);
                levels.sort_unstable();
                levels.dedup();
                Some(levels)
            }
        }
    }
}

/// Codes 1..k by empirical quantile membership. Equal values always
/// share a bin: the bin of `x` is `floor(k * F_<(x)) + 1` where `F_<`
/// is the strictly-below empirical CDF.
pub fn quantile_bin(values: &[f64], k: usize) -> Result<Vec<u32>> {
    if k < 2 {
        return Err(Error::Config("quantile_bin requires k >= 2".into()));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("quantile_bin: non-finite value".into()));
    }
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[0] == sorted[n - 1] {
        return Err(Error::Data(
            "quantile_bin: all values identical; treat the variable as categorical".into(),
        ));
    }
    let bins = values
        .iter()
        .map(|&x| {
            let below = sorted.partition_point(|&s| s < x);
            let bin = ((k as f64 * below as f64 / n as f64).floor() as u32 + 1).min(k as u32);
            bin
        })
        .collect();
    Ok(bins)
}

/// Codes 1..b+1 by left-closed intervals: code = #{breakpoints <= x} + 1.
pub fn interval_bin(values: &[f64], breakpoints: &[f64]) -> Result<Vec<u32>> {
    let rule = RecodeRule::IntervalBin {
        breakpoints: breakpoints.to_vec(),
    };
    rule.validate()?;
    Ok(values
        .iter()
        .map(|&x| breakpoints.partition_point(|&b| b <= x) as u32 + 1)
        .collect())
}

/// Element-wise regrouping. Missing cells map to `na_level` when set,
/// else stay missing. Uncovered codes map to `default_level` or error.
pub fn map_groups(
    values: &[Option<u32>],
    map: &BTreeMap<u32, u32>,
    na_level: Option<u32>,
    default_level: Option<u32>,
) -> Result<Vec<Option<u32>>> {
    values
        .iter()
        .map(|cell| match cell {
            None => Ok(na_level),
            Some(code) => match map.get(code) {
                Some(&new) => Ok(Some(new)),
                None => default_level.map(Some).ok_or_else(|| {
                    Error::Data(format!("map_groups: code {code} not covered and no default"))
                }),
            },
        })
        .collect()
}

/// I.i.d. draws from a declared category distribution.
pub fn random_category<R: Rng>(
    n: usize,
    levels: &[u32],
    probabilities: &[f64],
    rng: &mut R,
) -> Result<Vec<u32>> {
    let rule = RecodeRule::RandomCategory {
        levels: levels.to_vec(),
        probabilities: probabilities.to_vec(),
    };
    rule.validate()?;
    let dist = WeightedIndex::new(probabilities)
        .map_err(|e| Error::Config(format!("random_category: {e}")))?;
    Ok((0..n).map(|_| levels[dist.sample(rng)]).collect())
}

/// Per row, find the column with the maximum value and emit the level
/// of the group that contains it. Ties across groups go to the first
/// group in declared order; rows where every value is zero emit
/// `all_zero_level`.
pub fn max_of_columns(
    table: &DataTable,
    groups: &[MaxGroup],
    all_zero_level: u32,
) -> Result<Vec<u32>> {
    let mut group_cols: Vec<(usize, Vec<&[Option<f64>]>)> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        let cols: Result<Vec<&[Option<f64>]>> =
            g.columns.iter().map(|c| table.metric(c)).collect();
        group_cols.push((gi, cols?));
    }
    let n = table.n_rows();
    let mut out = Vec::with_capacity(n);
    for row in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (gi, cols) in &group_cols {
            for col in cols {
                let x = col[row].unwrap_or(0.0);
                if x < 0.0 {
                    return Err(Error::Data(
                        "max_of_columns: negative value in source column".into(),
                    ));
                }
                match best {
                    Some((_, bx)) if x <= bx => {}
                    _ if x == 0.0 => {}
                    _ => best = Some((*gi, x)),
                }
            }
        }
        out.push(match best {
            Some((gi, _)) => groups[gi].level,
            None => all_zero_level,
        });
    }
    Ok(out)
}

/// Apply a rule to a column of `table`, producing the categorised
/// values. `RandomCategory` requires the caller-supplied generator.
pub fn apply_rule<R: Rng>(
    table: &DataTable,
    name: &str,
    rule: &RecodeRule,
    rng: &mut R,
) -> Result<Vec<Option<u32>>> {
    rule.validate()?;
    match rule {
        RecodeRule::QuantileBin { k } => {
            let rows: Vec<usize> = (0..table.n_rows()).collect();
            let values = table.metric_dense(name, &rows)?;
            Ok(quantile_bin(&values, *k)?.into_iter().map(Some).collect())
        }
        RecodeRule::IntervalBin { breakpoints } => {
            let rows: Vec<usize> = (0..table.n_rows()).collect();
            let values = table.metric_dense(name, &rows)?;
            Ok(interval_bin(&values, breakpoints)?
                .into_iter()
                .map(Some)
                .collect())
        }
        RecodeRule::MapGroups {
            map,
            na_level,
            default_level,
        } => map_groups(table.categorical(name)?, map, *na_level, *default_level),
        RecodeRule::RandomCategory {
            levels,
            probabilities,
        } => Ok(random_category(table.n_rows(), levels, probabilities, rng)?
            .into_iter()
            .map(Some)
            .collect()),
        RecodeRule::MaxOfColumns {
            groups,
            all_zero_level,
        } => Ok(max_of_columns(table, groups, *all_zero_level)?
            .into_iter()
            .map(Some)
            .collect()),
    }
}

/// The activity-status regrouping of the self-defined economic status
/// codes: working, unemployed, retired, domestic, disabled, and a
/// not-specified category 9 that also absorbs missing values.
pub fn activity_status_rule() -> RecodeRule {
    let map: BTreeMap<u32, u32> = [
        (1, 1),
        (2, 1),
        (3, 1),
        (4, 1),
        (5, 2),
        (7, 3),
        (10, 4),
        (8, 5),
        (6, 9),
        (9, 9),
        (11, 9),
    ]
    .into_iter()
    .collect();
    RecodeRule::MapGroups {
        map,
        na_level: Some(9),
        default_level: None,
    }
}

/// Population-density generation probabilities: densely populated,
/// intermediate, thinly populated.
pub fn population_density_rule() -> RecodeRule {
    RecodeRule::RandomCategory {
        levels: vec![1, 2, 3],
        probabilities: vec![0.358, 0.418, 0.224],
    }
}

/// Main-source-of-income derivation: wages/self-employment/property
/// income columns collapse to 1, pension/benefit columns to 2, all-zero
/// rows to the NA category 9.
pub fn main_income_source_rule() -> RecodeRule {
    RecodeRule::MaxOfColumns {
        groups: vec![
            MaxGroup {
                columns: vec![
                    "PY010G".into(),
                    "PY020G".into(),
                    "PY050G".into(),
                    "PY080G".into(),
                ],
                level: 1,
            },
            MaxGroup {
                columns: vec![
                    "PY100G".into(),
                    "PY090G".into(),
                    "PY110G".into(),
                    "PY120G".into(),
                    "PY130G".into(),
                    "PY140G".into(),
                ],
                level: 2,
            },
        ],
        all_zero_level: 9,
    }
}
