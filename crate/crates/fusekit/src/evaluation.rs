//! Correlation, bias, MSE, and the conditional-independence benchmark.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DataTable, FusionSchema};
use crate::error::{Error, Result};
use crate::regression::{dummy_expand, ols_fit};

/// Sample Pearson correlation.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Data("pearson_corr: need equal lengths >= 2".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Data("pearson_corr: constant input vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Benchmark correlation of `y` and `z` under conditional independence
/// given `x`, with linear conditional means: Cov(yhat, zhat) over
/// sd(y)·sd(z), where the hats are fitted values of the regressions on
/// the dummy-expanded x list over the whole population.
pub fn cia_corr(
    pop: &DataTable,
    y: &str,
    z: &str,
    x: &[&str],
    schema: &FusionSchema,
) -> Result<f64> {
    let rows: Vec<usize> = (0..pop.n_rows()).collect();
    let design = dummy_expand(pop, &rows, x, schema)?;
    let yv = DVector::from_vec(pop.metric_dense(y, &rows)?);
    let zv = DVector::from_vec(pop.metric_dense(z, &rows)?);
    let mut responses = DMatrix::zeros(rows.len(), 2);
    responses.set_column(0, &yv);
    responses.set_column(1, &zv);
    let fit = ols_fit(&design, &responses)?;
    let n = rows.len() as f64;
    let yhat = fit.fitted.column(0);
    let zhat = fit.fitted.column(1);
    let my = yhat.mean();
    let mz = zhat.mean();
    let cov: f64 = yhat
        .iter()
        .zip(zhat.iter())
        .map(|(&a, &b)| (a - my) * (b - mz))
        .sum::<f64>()
        / n;
    let sd = |v: &DVector<f64>| {
        let m = v.mean();
        (v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
    };
    let sy = sd(&yv);
    let sz = sd(&zv);
    if sy == 0.0 || sz == 0.0 {
        return Err(Error::Data("cia_corr: degenerate variable".into()));
    }
    Ok((cov / (sy * sz)).clamp(-1.0, 1.0))
}

/// Monte Carlo summary of an estimator against its true value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub n: usize,
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Inclusive empirical quantile (linear interpolation between order
/// statistics).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Bias, MSE, and quantile summary of a vector of replication
/// estimates.
pub fn summarize(estimates: &[f64], true_value: f64) -> Result<EstimateSummary> {
    if estimates.is_empty() {
        return Err(Error::Data("summarize: empty estimate vector".into()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let bias = mean - true_value;
    let mse = estimates
        .iter()
        .map(|&e| (e - true_value) * (e - true_value))
        .sum::<f64>()
        / n;
    let mut sorted = estimates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(EstimateSummary {
        n: estimates.len(),
        mean,
        bias,
        mse,
        min: sorted[0],
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.50),
        q75: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}
