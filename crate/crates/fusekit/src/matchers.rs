//! The fusion engines: stratified Random Hot Deck, multivariate
//! Predictive Mean Matching, and Gower-distance nearest neighbour.
//!
//! All three are unconstrained: a donor may serve any number of
//! recipients. Each engine produces a [`MatchAssignment`] that
//! [`impute`] turns into a filled recipient table.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, DataTable, FusionSchema, ScaleLevel, StackedFrame, VariableRole};
use crate::error::{Error, Result};
use crate::regression::{backward_select, dummy_expand, max_subset_select, ols_fit, Criterion};

/// How a recipient ended up with its donor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackKind {
    /// Matched in the primary round.
    None,
    /// Matched in the relaxed second round.
    SecondRound,
    /// Uniform random donor from the full pool after both rounds.
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    Rhd,
    Pmm,
    Gower,
}

impl std::fmt::Display for MatchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMethod::Rhd => "rhd",
            MatchMethod::Pmm => "pmm",
            MatchMethod::Gower => "gower",
        })
    }
}

/// One recipient-donor pairing. Row indices refer to the stacked frame.
#[derive(Debug, Clone)]
pub struct MatchPair {
    pub recipient: usize,
    pub donor: usize,
    /// Stratum key (RHD only).
    pub stratum: Option<String>,
    /// Distance value (PMM/Gower only).
    pub distance: Option<f64>,
    pub fallback: FallbackKind,
}

/// Recipient-to-donor map with per-pair metadata.
#[derive(Debug, Clone)]
pub struct MatchAssignment {
    pub method: MatchMethod,
    pub pairs: Vec<MatchPair>,
    /// Common variables that survived selection.
    pub selected: Vec<String>,
    /// Degradation reports (pseudo-inverse use, identity weighting,
    /// zero-range variables, cap reductions).
    pub notes: Vec<String>,
}

impl MatchAssignment {
    pub fn fallback_count(&self) -> usize {
        self.pairs
            .iter()
            .filter(|p| p.fallback != FallbackKind::None)
            .count()
    }

    pub fn donor_for(&self, recipient: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|p| p.recipient == recipient)
            .map(|p| p.donor)
    }
}

/// Random Hot Deck tuning. `c_primary`/`c_secondary` bound the stratum
/// recipient/donor pressure relative to the global ratio; up to
/// `tolerance` of recipients may sit in violating strata before the
/// selection is shrunk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhdConfig {
    pub c_primary: f64,
    pub c_secondary: f64,
    pub tolerance: f64,
    pub criterion: Criterion,
}

impl Default for RhdConfig {
    fn default() -> Self {
        RhdConfig {
            c_primary: 3.0,
            c_secondary: 2.0,
            tolerance: 0.10,
            criterion: Criterion::Bic,
        }
    }
}

impl RhdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_primary >= self.c_secondary && self.c_secondary >= 1.0) {
            return Err(Error::Config(
                "rhd: require c_primary >= c_secondary >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.tolerance) {
            return Err(Error::Config("rhd: tolerance must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Predictive Mean Matching tuning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmmConfig {
    pub criterion: Criterion,
    /// Donors within this distance of the minimum count as tied.
    pub tie_epsilon: f64,
}

impl Default for PmmConfig {
    fn default() -> Self {
        PmmConfig {
            criterion: Criterion::Bic,
            tie_epsilon: 0.0,
        }
    }
}

impl PmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tie_epsilon < 0.0 {
            return Err(Error::Config("pmm: tie_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-row stratum key: delimiter-joined category codes in the given
/// variable order. All variables must be categorical and observed.
pub fn build_stratum_keys(
    table: &DataTable,
    rows: &[usize],
    variables: &[&str],
) -> Result<Vec<String>> {
    let mut code_cols = Vec::with_capacity(variables.len());
    for &v in variables {
        match table.column(v)? {
            Column::Categorical(_) => code_cols.push(table.categorical_dense(v, rows)?),
            Column::Metric(_) => {
                return Err(Error::Match(format!(
                    "stratum variable '{v}' is metric; categorise it first"
                )))
            }
        }
    }
    Ok((0..rows.len())
        .map(|i| {
            code_cols
                .iter()
                .map(|c| c[i].to_string())
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect())
}

/// Uniform random donor assignment within strata of identical
/// categorised common-variable values, with the donor-pressure
/// threshold, subset-size reduction loop, and the relaxed second round.
pub fn rhd_match<R: Rng>(
    frame: &StackedFrame,
    schema: &FusionSchema,
    target: &str,
    config: &RhdConfig,
    rng: &mut R,
) -> Result<MatchAssignment> {
    config.validate()?;
    if frame.n_donor == 0 {
        return Err(Error::Match("donor block is empty".into()));
    }
    let spec = schema.require(target)?;
    if spec.role != VariableRole::SpecificDonor {
        return Err(Error::Match(format!("'{target}' is not donor-specific")));
    }
    let common: Vec<&str> = schema.common_names();
    for &c in &common {
        if schema.require(c)?.scale.is_metric() {
            return Err(Error::Match(format!(
                "common variable '{c}' is metric; apply its recode rule before RHD"
            )));
        }
    }
    let rec_rows = frame.recipient_rows();
    let don_rows = frame.donor_rows();
    let s_rec = rec_rows.len() as f64;
    let s_don = don_rows.len() as f64;
    let global_ratio = s_rec / s_don;
    let mut notes = Vec::new();

    // Selection loop: shrink the subset-size cap until the violating
    // strata hold at most `tolerance` of the recipients.
    let mut cap = common.len();
    let mut selected: Vec<String>;
    let (keys_rec, keys_don);
    loop {
        selected = if cap == 0 {
            Vec::new()
        } else {
            max_subset_select(
                &frame.table,
                &don_rows,
                target,
                &common,
                cap,
                schema,
                config.criterion,
            )?
        };
        let sel_refs: Vec<&str> = selected.iter().map(|s| s.as_str()).collect();
        let kr = if sel_refs.is_empty() {
            vec![String::new(); rec_rows.len()]
        } else {
            build_stratum_keys(&frame.table, &rec_rows, &sel_refs)?
        };
        let kd = if sel_refs.is_empty() {
            vec![String::new(); don_rows.len()]
        } else {
            build_stratum_keys(&frame.table, &don_rows, &sel_refs)?
        };
        let mut don_count: HashMap<&str, usize> = HashMap::new();
        for k in &kd {
            *don_count.entry(k.as_str()).or_insert(0) += 1;
        }
        let mut rec_count: HashMap<&str, usize> = HashMap::new();
        for k in &kr {
            *rec_count.entry(k.as_str()).or_insert(0) += 1;
        }
        let violating: usize = rec_count
            .iter()
            .filter(|(k, &n_rec_l)| {
                let n_don_l = don_count.get(**k).copied().unwrap_or(0);
                n_don_l == 0
                    || n_rec_l as f64 / n_don_l as f64 > config.c_primary * global_ratio
            })
            .map(|(_, &n)| n)
            .sum();
        if violating as f64 <= config.tolerance * s_rec || cap == 0 {
            keys_rec = kr;
            keys_don = kd;
            break;
        }
        cap -= 1;
        notes.push(format!(
            "rhd[{target}]: donor-pressure check failed; subset cap reduced to {cap}"
        ));
    }

    // Donor row indices per stratum. Ordered maps: the assignment loops
    // below consume the shared generator per stratum, so iteration
    // order must not depend on hasher state.
    let mut donors_by_stratum: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys_don.iter().enumerate() {
        donors_by_stratum.entry(k.as_str()).or_default().push(don_rows[i]);
    }
    let mut rec_by_stratum: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys_rec.iter().enumerate() {
        rec_by_stratum.entry(k.as_str()).or_default().push(i);
    }

    let mut assigned: Vec<Option<(usize, FallbackKind)>> = vec![None; rec_rows.len()];

    // Round one under c_primary: admissible strata only.
    for (stratum, members) in &rec_by_stratum {
        let pool = donors_by_stratum.get(stratum);
        let admissible = pool.is_some_and(|p| {
            members.len() as f64 / p.len() as f64 <= config.c_primary * global_ratio
        });
        if admissible {
            let pool = pool.unwrap();
            for &i in members {
                let donor = pool[rng.random_range(0..pool.len())];
                assigned[i] = Some((donor, FallbackKind::None));
            }
        }
    }
    // Round two under c_secondary, no tolerance.
    for (stratum, members) in &rec_by_stratum {
        if assigned[members[0]].is_some() {
            continue;
        }
        let pool = donors_by_stratum.get(stratum);
        let admissible = pool.is_some_and(|p| {
            members.len() as f64 / p.len() as f64 <= config.c_secondary * global_ratio
        });
        if admissible {
            let pool = pool.unwrap();
            for &i in members {
                let donor = pool[rng.random_range(0..pool.len())];
                assigned[i] = Some((donor, FallbackKind::SecondRound));
            }
        }
    }
    // Emergency: uniform random donor from the full pool.
    for slot in assigned.iter_mut() {
        if slot.is_none() {
            let donor = don_rows[rng.random_range(0..don_rows.len())];
            *slot = Some((donor, FallbackKind::Emergency));
        }
    }

    let pairs = rec_rows
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let (donor, fallback) = assigned[i].unwrap();
            MatchPair {
                recipient: r,
                donor,
                stratum: Some(keys_rec[i].clone()),
                distance: None,
                fallback,
            }
        })
        .collect();
    Ok(MatchAssignment {
        method: MatchMethod::Rhd,
        pairs,
        selected,
        notes,
    })
}

/// Invert the residual covariance, degrading to a pseudo-inverse and
/// then to identity weighting, with notes.
fn invert_residual_cov(s: &DMatrix<f64>, notes: &mut Vec<String>) -> DMatrix<f64> {
    let m = s.nrows();
    if let Some(chol) = s.clone().cholesky() {
        return chol.inverse();
    }
    if let Ok(pinv) = s.clone().pseudo_inverse(1e-12) {
        if pinv.iter().all(|x| x.is_finite()) && pinv.norm() > 0.0 {
            notes.push("pmm: residual covariance singular; using pseudo-inverse".into());
            return pinv;
        }
    }
    notes.push("pmm: residual covariance degenerate; using identity weighting".into());
    DMatrix::identity(m, m)
}

/// Nearest-neighbour matching on regression-predicted means of the
/// target variables, with Mahalanobis distances weighted by the inverse
/// residual covariance of the joint donor-block fit.
pub fn pmm_match<R: Rng>(
    frame: &StackedFrame,
    schema: &FusionSchema,
    targets: &[&str],
    config: &PmmConfig,
    rng: &mut R,
) -> Result<MatchAssignment> {
    config.validate()?;
    if frame.n_donor == 0 {
        return Err(Error::Match("donor block is empty".into()));
    }
    if targets.is_empty() {
        return Err(Error::Match("no target variables".into()));
    }
    for &t in targets {
        let spec = schema.require(t)?;
        if spec.role != VariableRole::SpecificDonor || !spec.scale.is_metric() {
            return Err(Error::Match(format!(
                "pmm target '{t}' must be a metric donor-specific variable"
            )));
        }
    }
    let common: Vec<&str> = schema.common_names();
    let rec_rows = frame.recipient_rows();
    let don_rows = frame.donor_rows();
    let mut notes = Vec::new();

    // Per-target selection on the donor block, then the union.
    let mut union: Vec<String> = Vec::new();
    for &t in targets {
        let sel = backward_select(
            &frame.table,
            &don_rows,
            t,
            &common,
            schema,
            config.criterion,
        )?;
        for v in sel {
            if !union.contains(&v) {
                union.push(v);
            }
        }
    }
    // Keep the schema's common-variable order.
    let selected: Vec<String> = common
        .iter()
        .filter(|c| union.iter().any(|u| u == *c))
        .map(|c| c.to_string())
        .collect();
    if selected.is_empty() {
        notes.push(
            "pmm: empty selection for every target; predictive means are intercept-only".into(),
        );
    }
    let sel_refs: Vec<&str> = selected.iter().map(|s| s.as_str()).collect();

    // Joint multivariate fit on donor rows.
    let design_don = dummy_expand(&frame.table, &don_rows, &sel_refs, schema)?;
    let m = targets.len();
    let mut responses = DMatrix::zeros(don_rows.len(), m);
    for (j, &t) in targets.iter().enumerate() {
        let col = frame.table.metric_dense(t, &don_rows)?;
        responses.set_column(j, &DVector::from_vec(col));
    }
    let fit = ols_fit(&design_don, &responses)?;

    // Predictive means for both blocks from the same coefficients. The
    // recipient design must share the donor design's column layout, so
    // rebuild it from the donor expansion's kept columns.
    let design_rec = expand_like(&frame.table, &rec_rows, &design_don, schema)?;
    let z_don = fit.fitted.clone();
    let z_rec = &design_rec * &fit.coefficients;

    let s_inv = if fit.residuals.norm() <= 1e-12 {
        notes.push("pmm: all residuals zero; using identity weighting".into());
        DMatrix::identity(m, m)
    } else {
        invert_residual_cov(&fit.residual_cov, &mut notes)
    };

    let mut pairs = Vec::with_capacity(rec_rows.len());
    let mut ties: Vec<usize> = Vec::new();
    for (i, &r) in rec_rows.iter().enumerate() {
        let zi = z_rec.row(i);
        let mut best = f64::INFINITY;
        let mut dists = Vec::with_capacity(don_rows.len());
        for j in 0..don_rows.len() {
            let d = zi - z_don.row(j);
            let dist = (&d * &s_inv * d.transpose())[(0, 0)].max(0.0);
            dists.push(dist);
            if dist < best {
                best = dist;
            }
        }
        ties.clear();
        for (j, &d) in dists.iter().enumerate() {
            if d <= best + config.tie_epsilon {
                ties.push(j);
            }
        }
        let pick = ties[rng.random_range(0..ties.len())];
        pairs.push(MatchPair {
            recipient: r,
            donor: don_rows[pick],
            stratum: None,
            distance: Some(dists[pick]),
            fallback: FallbackKind::None,
        });
    }
    Ok(MatchAssignment {
        method: MatchMethod::Pmm,
        pairs,
        selected,
        notes,
    })
}

/// Expand rows with exactly the column layout of a previously built
/// design (same kept dummies, same order).
fn expand_like(
    table: &DataTable,
    rows: &[usize],
    reference: &crate::regression::DesignMatrix,
    schema: &FusionSchema,
) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let q = reference.q();
    let mut out = DMatrix::zeros(n, q);
    for j in 0..q {
        let owner = &reference.column_owner[j];
        if owner == "(intercept)" {
            out.set_column(j, &DVector::from_element(n, 1.0));
            continue;
        }
        let spec = schema.require(owner)?;
        match &spec.scale {
            ScaleLevel::Metric => {
                let vals = table.metric_dense(owner, rows)?;
                out.set_column(j, &DVector::from_vec(vals));
            }
            ScaleLevel::Categorical { .. } => {
                // Level recovery: columns of the same owner appear in
                // declared-level order among the kept columns; track how
                // many we have emitted so far.
                let emitted = reference.column_owner[..j]
                    .iter()
                    .filter(|o| *o == owner)
                    .count();
                let levels = kept_levels(reference, owner, schema)?;
                let level = levels[emitted];
                let codes = table.categorical_dense(owner, rows)?;
                let col = DVector::from_iterator(
                    n,
                    codes.iter().map(|&c| if c == level { 1.0 } else { 0.0 }),
                );
                out.set_column(j, &col);
            }
        }
    }
    Ok(out)
}

/// The dummy levels of `owner` that survived pruning, in declared order.
fn kept_levels(
    reference: &crate::regression::DesignMatrix,
    owner: &str,
    schema: &FusionSchema,
) -> Result<Vec<u32>> {
    let levels = schema
        .require(owner)?
        .scale
        .levels()
        .ok_or_else(|| Error::Regression(format!("'{owner}' is not categorical")))?;
    let pruned: Vec<String> = reference.pruned.clone();
    Ok(levels[1..]
        .iter()
        .copied()
        .filter(|l| !pruned.contains(&format!("{owner}={l}")))
        .collect())
}

/// Nearest neighbour under mean per-variable Gower dissimilarity:
/// indicator mismatch for categoricals, range-normalised absolute
/// difference for metrics (pooled range over both blocks).
pub fn gower_match<R: Rng>(
    frame: &StackedFrame,
    schema: &FusionSchema,
    variables: &[&str],
    rng: &mut R,
) -> Result<MatchAssignment> {
    if frame.n_donor == 0 {
        return Err(Error::Match("donor block is empty".into()));
    }
    if variables.is_empty() {
        return Err(Error::Match("no matching variables".into()));
    }
    let rec_rows = frame.recipient_rows();
    let don_rows = frame.donor_rows();
    let mut notes = Vec::new();

    enum Prepared {
        Metric { rec: Vec<f64>, don: Vec<f64>, range: f64 },
        Categorical { rec: Vec<u32>, don: Vec<u32> },
    }
    let mut prepared = Vec::with_capacity(variables.len());
    for &v in variables {
        match schema.require(v)?.scale {
            ScaleLevel::Metric => {
                let rec = frame.table.metric_dense(v, &rec_rows)?;
                let don = frame.table.metric_dense(v, &don_rows)?;
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &x in rec.iter().chain(don.iter()) {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                let range = hi - lo;
                if range <= 0.0 {
                    notes.push(format!(
                        "gower: variable '{v}' has zero pooled range; it contributes 0 to all distances"
                    ));
                }
                prepared.push(Prepared::Metric { rec, don, range });
            }
            ScaleLevel::Categorical { .. } => prepared.push(Prepared::Categorical {
                rec: frame.table.categorical_dense(v, &rec_rows)?,
                don: frame.table.categorical_dense(v, &don_rows)?,
            }),
        }
    }

    let p = prepared.len() as f64;
    let mut pairs = Vec::with_capacity(rec_rows.len());
    let mut ties: Vec<usize> = Vec::new();
    for (i, &r) in rec_rows.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut dists = Vec::with_capacity(don_rows.len());
        for j in 0..don_rows.len() {
            let mut total = 0.0;
            for prep in &prepared {
                total += match prep {
                    Prepared::Metric { rec, don, range } => {
                        if *range > 0.0 {
                            (rec[i] - don[j]).abs() / range
                        } else {
                            0.0
                        }
                    }
                    Prepared::Categorical { rec, don } => {
                        if rec[i] == don[j] {
                            0.0
                        } else {
                            1.0
                        }
                    }
                };
            }
            let dist = total / p;
            dists.push(dist);
            if dist < best {
                best = dist;
            }
        }
        ties.clear();
        for (j, &d) in dists.iter().enumerate() {
            if d <= best {
                ties.push(j);
            }
        }
        let pick = ties[rng.random_range(0..ties.len())];
        pairs.push(MatchPair {
            recipient: r,
            donor: don_rows[pick],
            stratum: None,
            distance: Some(dists[pick]),
            fallback: FallbackKind::None,
        });
    }
    Ok(MatchAssignment {
        method: MatchMethod::Gower,
        pairs,
        selected: variables.iter().map(|v| v.to_string()).collect(),
        notes,
    })
}

/// Fill the recipient block's target columns from the assigned donors.
/// All listed targets are copied from the same donor row per recipient.
pub fn impute(
    frame: &StackedFrame,
    assignment: &MatchAssignment,
    targets: &[&str],
) -> Result<DataTable> {
    let rec_rows = frame.recipient_rows();
    let mut donor_of: HashMap<usize, usize> = HashMap::new();
    for p in &assignment.pairs {
        if p.donor >= frame.table.n_rows() {
            return Err(Error::Match(format!("donor row {} out of range", p.donor)));
        }
        donor_of.insert(p.recipient, p.donor);
    }
    for &r in &rec_rows {
        if !donor_of.contains_key(&r) {
            return Err(Error::Match(format!("recipient row {r} has no donor")));
        }
    }
    let mut out = frame.table.select_rows(&rec_rows);
    for &t in targets {
        let source = frame.table.column(t)?;
        let filled = match source {
            Column::Metric(v) => Column::Metric(
                rec_rows.iter().map(|r| v[donor_of[r]]).collect(),
            ),
            Column::Categorical(v) => Column::Categorical(
                rec_rows.iter().map(|r| v[donor_of[r]]).collect(),
            ),
        };
        out.set_column(t, filled)?;
    }
    Ok(out)
}
