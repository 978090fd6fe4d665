//! Gaussian-copula synthetic populations.
//!
//! Draws a multivariate standard normal with a declared latent
//! correlation and pushes each margin through its transform: normal and
//! lognormal quantile maps for metric variables, threshold cuts for
//! categoricals. The latent matrix can be written out in full or built
//! from per-variable correlations to a pair of anchor variables; the
//! anchored form is always positive semi-definite by construction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, DataTable};
use crate::error::{Error, Result};
use crate::evaluation::pearson_corr;

/// Marginal transform of one generated variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    Normal { mean: f64, sd: f64 },
    Lognormal { mu: f64, sigma: f64 },
    /// Threshold cuts on the latent normal; `t` thresholds give codes
    /// 1..t+1.
    Categorical { thresholds: Vec<f64> },
}

impl Margin {
    pub fn is_metric(&self) -> bool {
        !matches!(self, Margin::Categorical { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthVariable {
    pub name: String,
    pub margin: Margin,
}

/// Latent correlation: either the full matrix (row-major, variable
/// order) or the anchored construction. In the anchored form every
/// non-anchor variable is a linear combination of the two anchors plus
/// an independent residual, so declared anchor correlations are hit
/// exactly and the matrix is valid whenever each loading pair is
/// jointly feasible.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentCorrelation {
    Matrix(Vec<Vec<f64>>),
    Anchored {
        anchors: [String; 2],
        anchor_correlation: f64,
        /// Per variable: target correlations to the two anchors.
        loadings: BTreeMap<String, [f64; 2]>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
    pub correlation: LatentCorrelation,
    pub variables: Vec<SynthVariable>,
}

/// Generation diagnostics: repairs applied and achieved metric-metric
/// correlations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthReport {
    pub repaired: bool,
    pub achieved_correlations: Vec<(String, String, f64)>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("synth: n must be positive".into()));
        }
        for v in &self.variables {
            match &v.margin {
                Margin::Normal { sd, .. } if *sd <= 0.0 => {
                    return Err(Error::Config(format!("synth: '{}' sd must be > 0", v.name)))
                }
                Margin::Lognormal { sigma, .. } if *sigma <= 0.0 => {
                    return Err(Error::Config(format!(
                        "synth: '{}' sigma must be > 0",
                        v.name
                    )))
                }
                Margin::Categorical { thresholds } => {
                    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Config(format!(
                            "synth: '{}' thresholds must be nonempty and strictly increasing",
                            v.name
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolve the latent correlation into a full matrix in variable
    /// order.
    pub fn latent_matrix(&self) -> Result<DMatrix<f64>> {
        let names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        let p = names.len();
        match &self.correlation {
            LatentCorrelation::Matrix(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Config(format!(
                        "synth: latent matrix must be {p}x{p}"
                    )));
                }
                let mut m = DMatrix::zeros(p, p);
                for (i, row) in rows.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        m[(i, j)] = v;
                    }
                }
                if (&m - m.transpose()).amax() > 1e-12 {
                    return Err(Error::Config("synth: latent matrix not symmetric".into()));
                }
                for i in 0..p {
                    if (m[(i, i)] - 1.0).abs() > 1e-12 {
                        return Err(Error::Config("synth: latent diagonal must be 1".into()));
                    }
                }
                Ok(m)
            }
            LatentCorrelation::Anchored {
                anchors,
                anchor_correlation,
                loadings,
            } => {
                let r = *anchor_correlation;
                if !(-1.0..=1.0).contains(&r) || r.abs() >= 1.0 {
                    return Err(Error::Config(
                        "synth: anchor correlation must be in (-1, 1)".into(),
                    ));
                }
                let a0 = names
                    .iter()
                    .position(|n| *n == anchors[0])
                    .ok_or_else(|| Error::Config(format!("synth: anchor '{}' unknown", anchors[0])))?;
                let a1 = names
                    .iter()
                    .position(|n| *n == anchors[1])
                    .ok_or_else(|| Error::Config(format!("synth: anchor '{}' unknown", anchors[1])))?;
                // Correlation of each variable to the anchors.
                let mut t = vec![[0.0_f64; 2]; p];
                t[a0] = [1.0, r];
                t[a1] = [r, 1.0];
                for (i, name) in names.iter().enumerate() {
                    if i == a0 || i == a1 {
                        continue;
                    }
                    let load = loadings.get(*name).ok_or_else(|| {
                        Error::Config(format!("synth: missing anchor loadings for '{name}'"))
                    })?;
                    t[i] = *load;
                }
                // Explained variance t' R^-1 t must stay below 1 for
                // non-anchor variables.
                let det = 1.0 - r * r;
                let quad = |u: &[f64; 2], v: &[f64; 2]| {
                    (u[0] * v[0] + u[1] * v[1] - r * (u[0] * v[1] + u[1] * v[0])) / det
                };
                let mut m = DMatrix::identity(p, p);
                for i in 0..p {
                    if i != a0 && i != a1 {
                        let r2 = quad(&t[i], &t[i]);
                        if r2 >= 1.0 {
                            return Err(Error::Config(format!(
                                "synth: loadings for '{}' are infeasible (explained variance {r2:.3})",
                                names[i]
                            )));
                        }
                    }
                    for j in 0..p {
                        if i == j {
                            continue;
                        }
                        let both_anchor =
                            (i == a0 || i == a1) && (j == a0 || j == a1);
                        m[(i, j)] = if both_anchor { r } else { quad(&t[i], &t[j]) };
                    }
                }
                Ok(m)
            }
        }
    }
}

/// Standard normal CDF via an erfc rational expansion (absolute error
/// below 1.2e-7, plenty for threshold-share checks).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Draw the population: latent multivariate normal, then per-variable
/// margin transforms. Matrices within `1e-6` of positive semi-definite
/// are repaired by eigenvalue clipping and renormalisation (reported);
/// anything worse is an error.
pub fn synth_population<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<(DataTable, SynthReport)> {
    spec.validate()?;
    let p = spec.variables.len();
    let mut latent = spec.latent_matrix()?;

    let eig = latent.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    let mut repaired = false;
    if min_eig < 0.0 {
        if min_eig < -1e-6 {
            return Err(Error::Config(format!(
                "synth: latent matrix not positive semi-definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        let clipped = DVector::from_iterator(p, eig.eigenvalues.iter().map(|&l| l.max(0.0)));
        let mut m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        // Renormalize to unit diagonal.
        let d: Vec<f64> = (0..p).map(|i| m[(i, i)].sqrt()).collect();
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] /= d[i] * d[j];
            }
        }
        latent = m;
        repaired = true;
    }

    // Factor for sampling: Cholesky with a tiny jitter fallback for
    // semi-definite repaired matrices.
    let factor = latent.clone().cholesky().map(|c| c.l()).or_else(|| {
        let jittered = &latent + DMatrix::identity(p, p) * 1e-10;
        jittered.cholesky().map(|c| c.l())
    });
    let l = factor.ok_or_else(|| Error::Config("synth: latent matrix cannot be factored".into()))?;

    let n = spec.n;
    let mut latents: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    let mut z = DVector::zeros(p);
    for _ in 0..n {
        for k in 0..p {
            z[k] = StandardNormal.sample(rng);
        }
        let u = &l * &z;
        for k in 0..p {
            latents[k].push(u[k]);
        }
    }

    let mut names = Vec::with_capacity(p);
    let mut columns = Vec::with_capacity(p);
    for (k, v) in spec.variables.iter().enumerate() {
        names.push(v.name.clone());
        let col = match &v.margin {
            Margin::Normal { mean, sd } => {
                Column::Metric(latents[k].iter().map(|&u| Some(mean + sd * u)).collect())
            }
            Margin::Lognormal { mu, sigma } => {
                Column::Metric(latents[k].iter().map(|&u| Some((mu + sigma * u).exp())).collect())
            }
            Margin::Categorical { thresholds } => Column::Categorical(
                latents[k]
                    .iter()
                    .map(|&u| Some(thresholds.partition_point(|&t| t <= u) as u32 + 1))
                    .collect(),
            ),
        };
        columns.push(col);
    }
    let table = DataTable::new(names, columns)?;

    // Report achieved metric-metric correlations.
    let mut achieved = Vec::new();
    let metric: Vec<usize> = (0..p)
        .filter(|&k| spec.variables[k].margin.is_metric())
        .collect();
    for (ai, &i) in metric.iter().enumerate() {
        for &j in &metric[ai + 1..] {
            let a: Vec<f64> = table
                .metric(&spec.variables[i].name)?
                .iter()
                .map(|c| c.unwrap())
                .collect();
            let b: Vec<f64> = table
                .metric(&spec.variables[j].name)?
                .iter()
                .map(|c| c.unwrap())
                .collect();
            if let Ok(r) = pearson_corr(&a, &b) {
                achieved.push((
                    spec.variables[i].name.clone(),
                    spec.variables[j].name.clone(),
                    r,
                ));
            }
        }
    }
    Ok((
        table,
        SynthReport {
            repaired,
            achieved_correlations: achieved,
        },
    ))
}
