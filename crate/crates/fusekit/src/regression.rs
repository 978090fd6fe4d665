//! Ordinary least squares with categorical dummy expansion,
//! multivariate residual covariance, and backward-deletion variable
//! selection.
//!
//! This is the shared engine behind both matchers: Random Hot Deck uses
//! the selection to pick stratum variables, Predictive Mean Matching
//! uses the fit itself for predictive means and residual covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Column, DataTable, FusionSchema, ScaleLevel};
use crate::error::{Error, Result};

/// Model-selection criterion for backward deletion. Lower is better
/// after internal normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Bic,
    AdjustedR2,
}

/// Design matrix with intercept and dummy-expanded categoricals.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    /// Original variable behind each column; the intercept column maps
    /// to `"(intercept)"`.
    pub column_owner: Vec<String>,
    /// Columns dropped as constant or collinear, with the owning
    /// variable and dummy level where applicable.
    pub pruned: Vec<String>,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn q(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Fit of one or several responses on a shared design.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DMatrix<f64>,
    pub fitted: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
    /// (E^T E) / (n - q), symmetric positive semi-definite.
    pub residual_cov: DMatrix<f64>,
    pub selected: Vec<String>,
}

impl OlsFit {
    /// Apply the fitted coefficients to a new design with the same
    /// column layout.
    pub fn predict(&self, design: &DMatrix<f64>) -> DMatrix<f64> {
        design * &self.coefficients
    }
}

/// Expand `variables` over `rows` into intercept + metric columns +
/// one-hot-minus-reference dummies. The reference level of each
/// categorical is its first declared level. Constant and collinear
/// columns are pruned and reported.
pub fn dummy_expand(
    table: &DataTable,
    rows: &[usize],
    variables: &[&str],
    schema: &FusionSchema,
) -> Result<DesignMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Regression("empty row set".into()));
    }
    // Raw candidate columns in order: intercept first.
    let mut raw: Vec<(String, String, DVector<f64>)> = Vec::new();
    raw.push((
        "(intercept)".into(),
        "(intercept)".into(),
        DVector::from_element(n, 1.0),
    ));
    for &name in variables {
        let spec = schema.require(name)?;
        match (&spec.scale, table.column(name)?) {
            (ScaleLevel::Metric, Column::Metric(_)) => {
                let values = table.metric_dense(name, rows)?;
                raw.push((name.into(), name.into(), DVector::from_vec(values)));
            }
            (ScaleLevel::Categorical { levels }, Column::Categorical(_)) => {
                let codes = table.categorical_dense(name, rows)?;
                // Reference level: first declared.
                for &level in &levels[1..] {
                    let col = DVector::from_iterator(
                        n,
                        codes.iter().map(|&c| if c == level { 1.0 } else { 0.0 }),
                    );
                    raw.push((name.into(), format!("{name}={level}"), col));
                }
            }
            _ => {
                return Err(Error::Regression(format!(
                    "variable '{name}' storage does not match its declared scale"
                )))
            }
        }
    }

    // Greedy rank filter: keep a column only if it has a component
    // outside the span of the columns kept so far.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut pruned: Vec<String> = Vec::new();
    for (i, (_, label, col)) in raw.iter().enumerate() {
        let mut r = col.clone();
        for b in &basis {
            let proj = b.dot(&r);
            r -= b * proj;
        }
        let scale = col.norm().max(1.0);
        if r.norm() > 1e-8 * scale {
            basis.push(r.normalize());
            kept.push(i);
        } else {
            pruned.push(label.clone());
        }
    }

    let q = kept.len();
    let mut matrix = DMatrix::zeros(n, q);
    let mut column_owner = Vec::with_capacity(q);
    for (j, &i) in kept.iter().enumerate() {
        matrix.set_column(j, &raw[i].2);
        column_owner.push(raw[i].0.clone());
    }
    Ok(DesignMatrix {
        matrix,
        column_owner,
        pruned,
    })
}

/// Least squares of `responses` (n x m) on `design`, solved via the
/// normal equations with a symmetric positive-definite factorization.
pub fn ols_fit(design: &DesignMatrix, responses: &DMatrix<f64>) -> Result<OlsFit> {
    let x = &design.matrix;
    let n = x.nrows();
    let q = x.ncols();
    if responses.nrows() != n {
        return Err(Error::Regression("response length mismatch".into()));
    }
    if n <= q {
        return Err(Error::Regression(format!(
            "underdetermined fit: n={n} <= q={q}"
        )));
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * responses;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Regression("design rank deficient after pruning".into()))?;
    let coefficients = chol.solve(&xty);
    let fitted = x * &coefficients;
    let residuals = responses - &fitted;
    let mut residual_cov = residuals.transpose() * &residuals / (n - q) as f64;
    // Symmetrize away factorization round-off.
    let sym = (&residual_cov + residual_cov.transpose()) * 0.5;
    residual_cov = sym;
    Ok(OlsFit {
        coefficients,
        fitted,
        residuals,
        residual_cov,
        selected: Vec::new(),
    })
}

fn rss(residuals: &DMatrix<f64>) -> f64 {
    residuals.column(0).norm_squared()
}

/// Criterion score for a single-response fit; lower is better.
fn score(criterion: Criterion, n: usize, q: usize, rss: f64, tss: f64) -> f64 {
    let n_f = n as f64;
    match criterion {
        Criterion::Bic => n_f * (rss.max(1e-300) / n_f).ln() + q as f64 * n_f.ln(),
        Criterion::AdjustedR2 => {
            // Negated adjusted R-squared so that lower is better.
            if n <= q || tss <= 0.0 {
                return f64::INFINITY;
            }
            let adj = 1.0 - (rss / (n - q) as f64) / (tss / (n_f - 1.0));
            -adj
        }
    }
}

fn fit_score(
    table: &DataTable,
    rows: &[usize],
    response: &DVector<f64>,
    tss: f64,
    vars: &[&str],
    schema: &FusionSchema,
    criterion: Criterion,
) -> Result<f64> {
    let design = dummy_expand(table, rows, vars, schema)?;
    if design.n() <= design.q() {
        return Ok(f64::INFINITY);
    }
    let responses = DMatrix::from_column_slice(rows.len(), 1, response.as_slice());
    let fit = ols_fit(&design, &responses)?;
    Ok(score(criterion, design.n(), design.q(), rss(&fit.residuals), tss))
}

/// Backward-deletion selection: start from the full candidate set and
/// repeatedly delete the whole variable (all its dummy columns at once)
/// whose removal best improves the criterion, until no removal helps.
/// Returns survivors in original candidate order. A zero-variance
/// response yields the empty selection.
pub fn backward_select(
    table: &DataTable,
    rows: &[usize],
    response: &str,
    candidates: &[&str],
    schema: &FusionSchema,
    criterion: Criterion,
) -> Result<Vec<String>> {
    max_subset_select(table, rows, response, candidates, candidates.len(), schema, criterion)
}

/// [`backward_select`] with a cap on the returned subset size: deletion
/// continues unconditionally until at most `max_size` variables remain,
/// then criterion-based stopping applies.
pub fn max_subset_select(
    table: &DataTable,
    rows: &[usize],
    response: &str,
    candidates: &[&str],
    max_size: usize,
    schema: &FusionSchema,
    criterion: Criterion,
) -> Result<Vec<String>> {
    if candidates.is_empty() {
        return Err(Error::Regression("empty candidate list".into()));
    }
    if max_size == 0 {
        return Err(Error::Regression("max_size must be at least 1".into()));
    }
    let y = DVector::from_vec(table.metric_dense(response, rows)?);
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss <= 0.0 {
        return Ok(Vec::new());
    }

    let mut current: Vec<&str> = candidates.to_vec();
    let mut current_score = fit_score(table, rows, &y, tss, &current, schema, criterion)?;
    loop {
        if current.is_empty() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..current.len() {
            let mut trial = current.clone();
            trial.remove(i);
            let s = fit_score(table, rows, &y, tss, &trial, schema, criterion)?;
            if best.map_or(true, |(_, bs)| s < bs) {
                best = Some((i, s));
            }
        }
        let (idx, s) = best.unwrap();
        let over_cap = current.len() > max_size;
        if over_cap || s < current_score - 1e-10 {
            current.remove(idx);
            current_score = s;
        } else {
            break;
        }
    }
    Ok(current.into_iter().map(|s| s.to_string()).collect())
}
